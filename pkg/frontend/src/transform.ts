// Coordinate mapping between scene pixels, heatmap pixels and canvas space.
// Renders and heatmaps share the scene's pixel grid, so a single integer
// scale keeps every overlay pixel aligned with its scene pixel.

export interface ViewTransform {
  scale: number; // canvas pixels per scene pixel
  offsetX: number;
  offsetY: number;
}

export function makeTransform(
  sceneWidth: number,
  sceneHeight: number,
  canvasWidth: number,
  canvasHeight: number,
): ViewTransform {
  const scale = Math.max(
    1,
    Math.floor(Math.min(canvasWidth / sceneWidth, canvasHeight / sceneHeight)),
  );
  return {
    scale,
    offsetX: Math.floor((canvasWidth - sceneWidth * scale) / 2),
    offsetY: Math.floor((canvasHeight - sceneHeight * scale) / 2),
  };
}

/** Canvas position of a scene pixel's center. */
export function sceneToCanvas(t: ViewTransform, x: number, y: number): { x: number; y: number } {
  return {
    x: t.offsetX + (x + 0.5) * t.scale,
    y: t.offsetY + (y + 0.5) * t.scale,
  };
}

/** Heatmaps live on the scene grid; the mapping is identical by construction. */
export function heatmapToCanvas(t: ViewTransform, x: number, y: number): { x: number; y: number } {
  return sceneToCanvas(t, x, y);
}

/** Scene pixel under a canvas position (inverse of sceneToCanvas). */
export function canvasToScene(t: ViewTransform, cx: number, cy: number): { x: number; y: number } {
  return {
    x: Math.floor((cx - t.offsetX) / t.scale),
    y: Math.floor((cy - t.offsetY) / t.scale),
  };
}

export function calibrationError(
  t: ViewTransform,
  heatmapPeak: { x: number; y: number },
  marker: [number, number],
): number {
  const peak = heatmapToCanvas(t, heatmapPeak.x, heatmapPeak.y);
  const mark = sceneToCanvas(t, marker[0], marker[1]);
  return Math.hypot(peak.x - mark.x, peak.y - mark.y) / t.scale;
}
