// Minimal PNG decoder for the service's heatmaps and renders: 8-bit
// grayscale (color type 0), RGB (2) and RGBA (6), non-interlaced, using the
// platform's DecompressionStream for the zlib payload.

export interface DecodedPng {
  width: number;
  height: number;
  channels: number;
  pixels: Uint8Array; // row-major, `channels` bytes per pixel
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let offset = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Uint8Array[] = [];

  while (offset < bytes.length) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(...bytes.subarray(offset + 4, offset + 8));
    const data = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      const hv = new DataView(data.buffer, data.byteOffset, data.byteLength);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      bitDepth = data[8];
      colorType = data[9];
      if (data[12] !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
  const channels = { 0: 1, 2: 3, 6: 4 }[colorType];
  if (!channels) throw new Error(`unsupported color type ${colorType}`);

  const compressed = concat(idat);
  const raw = await inflate(compressed);
  const stride = width * channels;
  const pixels = new Uint8Array(stride * height);
  let pos = 0;
  for (let row = 0; row < height; row++) {
    const filter = raw[pos++];
    const line = raw.subarray(pos, pos + stride);
    pos += stride;
    unfilterRow(filter, line, pixels, row, stride, channels);
  }
  return { width, height, channels, pixels };
}

function unfilterRow(
  filter: number,
  line: Uint8Array,
  out: Uint8Array,
  row: number,
  stride: number,
  bpp: number,
): void {
  const base = row * stride;
  const prev = base - stride;
  for (let i = 0; i < stride; i++) {
    const x = line[i];
    const a = i >= bpp ? out[base + i - bpp] : 0;
    const b = row > 0 ? out[prev + i] : 0;
    const c = row > 0 && i >= bpp ? out[prev + i - bpp] : 0;
    let value: number;
    switch (filter) {
      case 0:
        value = x;
        break;
      case 1:
        value = x + a;
        break;
      case 2:
        value = x + b;
        break;
      case 3:
        value = x + Math.floor((a + b) / 2);
        break;
      case 4:
        value = x + paeth(a, b, c);
        break;
      default:
        throw new Error(`unknown PNG filter ${filter}`);
    }
    out[base + i] = value & 0xff;
  }
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

async function inflate(compressed: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([compressed.buffer as ArrayBuffer])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  const buffer = await new Response(stream).arrayBuffer();
  return new Uint8Array(buffer);
}

export function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

export function argmaxPixel(png: DecodedPng): { x: number; y: number; value: number } {
  // first channel, first maximum in row-major order
  let best = -1;
  let bx = 0;
  let by = 0;
  for (let y = 0; y < png.height; y++) {
    for (let x = 0; x < png.width; x++) {
      const v = png.pixels[(y * png.width + x) * png.channels];
      if (v > best) {
        best = v;
        bx = x;
        by = y;
      }
    }
  }
  return { x: bx, y: by, value: best };
}
