// Heatmap overlay rendering: decode the channel PNG once, colorize into an
// offscreen canvas, draw scaled with adjustable opacity.

import { base64ToBytes, decodePng, type DecodedPng } from "./png.js";

export interface OverlayImage {
  canvas: HTMLCanvasElement;
  normalization: number;
  decoded: DecodedPng;
}

// perceptually ordered ramp (dark blue -> yellow), 6 anchor stops
const RAMP: Array<[number, number, number]> = [
  [13, 8, 135],
  [84, 2, 163],
  [156, 23, 158],
  [205, 62, 113],
  [237, 121, 83],
  [240, 249, 33],
];

export function rampColor(value01: number): [number, number, number] {
  const x = Math.max(0, Math.min(1, value01)) * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(x));
  const f = x - i;
  const a = RAMP[i];
  const b = RAMP[i + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * f),
    Math.round(a[1] + (b[1] - a[1]) * f),
    Math.round(a[2] + (b[2] - a[2]) * f),
  ];
}

export async function buildOverlay(
  pngB64: string,
  normalization: number,
): Promise<OverlayImage> {
  const decoded = await decodePng(base64ToBytes(pngB64));
  const canvas = document.createElement("canvas");
  canvas.width = decoded.width;
  canvas.height = decoded.height;
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(decoded.width, decoded.height);
  for (let i = 0; i < decoded.width * decoded.height; i++) {
    const v = decoded.pixels[i * decoded.channels] / 255;
    const [r, g, b] = rampColor(v);
    image.data[i * 4] = r;
    image.data[i * 4 + 1] = g;
    image.data[i * 4 + 2] = b;
    image.data[i * 4 + 3] = Math.round(40 + 215 * v);
  }
  ctx.putImageData(image, 0, 0);
  return { canvas, normalization, decoded };
}
