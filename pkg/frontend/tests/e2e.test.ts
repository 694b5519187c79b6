// Scripted browser-session flow against a live service process: build a
// scene, instruct, inspect the heatmap, place, rate, and read the report.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, RelplaceClient } from "../src/api.js";
import { argmaxPixel, base64ToBytes, decodePng } from "../src/png.js";
import { calibrationError, makeTransform } from "../src/transform.js";

const PORT = 8137;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const r = await fetch(`${BASE}/session`, { method: "POST" });
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "relplace-e2e-"));
  const ckpt = join(dir, "spatial.ckpt");
  const made = spawnSync("python3", ["-c", [
    "from relplace.spatial import SpatialModel, save_checkpoint",
    `save_checkpoint(SpatialModel(seed=0), ${JSON.stringify(ckpt)})`,
  ].join("\n")], { cwd: "..", encoding: "utf-8" });
  if (made.status !== 0) throw new Error(`checkpoint build failed: ${made.stderr}`);

  server = spawn("python3", ["-m", "relplace.harness.cli", "serve",
    "--port", String(PORT), "--spatial", ckpt], {
    cwd: "..",
    stdio: ["ignore", "pipe", "pipe"],
  });
  await waitForServer();
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("end-to-end loop against the live service", () => {
  it("runs build -> instruct -> heatmap -> place -> rate -> report", async () => {
    const client = new RelplaceClient(BASE);
    const sid = await client.createSession();

    // build: one reference box on the table
    const scenePayload = await client.addObject(sid, "box", [48, 70]);
    expect(scenePayload.scene.objects).toHaveLength(1);

    await client.setSubject(sid, "can");
    const instruct = await client.instruct(sid, "put the can on the right of the box");
    expect(instruct.parsed.relation).toBe("right");
    expect(Object.keys(instruct.channels).sort()).toEqual(
      ["behind", "in_front", "inside", "left", "on_top", "right"]);

    // heatmap: decodable, same grid as the scene
    const channel = instruct.channels.right;
    const png = await decodePng(base64ToBytes(channel.png_b64));
    expect(png.width).toBe(instruct.width);
    expect(png.height).toBe(instruct.height);
    expect(channel.normalization).toBeGreaterThan(0);

    const placed = await client.place(sid, "sample", 7);
    const [tx, ty, tw, th] = placed.scene.table_region;
    expect(placed.placement[0]).toBeGreaterThanOrEqual(tx);
    expect(placed.placement[0]).toBeLessThan(tx + tw);
    expect(placed.placement[1]).toBeGreaterThanOrEqual(ty);
    expect(placed.placement[1]).toBeLessThan(ty + th);
    expect(placed.scene.objects).toHaveLength(2);

    await client.rate(sid, 8, true);
    const report = await client.report(sid);
    expect(report.history).toHaveLength(1);
    expect(report.per_relation.right.count).toBe(1);
    expect(report.per_relation.right.mean_likert).toBe(8);
    expect(report.per_relation.right.success_rate).toBe(1);
  }, 60_000);

  it("aligns the calibration peak with its marker within 1px", async () => {
    const client = new RelplaceClient(BASE);
    const sid = await client.createSession();
    const calib = await client.calibration(sid);
    const png = await decodePng(base64ToBytes(calib.png_b64));
    const peak = argmaxPixel(png);
    const t = makeTransform(calib.width, calib.height, 480, 480);
    expect(calibrationError(t, peak, calib.marker)).toBeLessThanOrEqual(1);
  }, 30_000);

  it("report aggregates match the server-side history exactly", async () => {
    const client = new RelplaceClient(BASE);
    const sid = await client.createSession();
    await client.addObject(sid, "box", [48, 70]);
    const ratings: Array<[string, number, boolean]> = [
      ["put the can left of the box", 4, false],
      ["put the can left of the box", 9, true],
      ["put the ball behind the box", 7, true],
    ];
    for (const [text, likert, success] of ratings) {
      await client.instruct(sid, text);
      await client.place(sid, "sample", likert);
      await client.rate(sid, likert, success);
    }
    const report = await client.report(sid);
    // recompute aggregates from the raw history the server returns
    const byRelation = new Map<string, { likerts: number[]; successes: boolean[] }>();
    for (const entry of report.history) {
      expect(entry.rating).not.toBeNull();
      const bucket = byRelation.get(entry.parsed.relation) ??
        { likerts: [], successes: [] };
      bucket.likerts.push(entry.rating!.likert);
      bucket.successes.push(entry.rating!.success);
      byRelation.set(entry.parsed.relation, bucket);
    }
    for (const [relation, bucket] of byRelation) {
      const row = report.per_relation[relation];
      const meanLikert = bucket.likerts.reduce((a, b) => a + b, 0) / bucket.likerts.length;
      const successRate =
        bucket.successes.filter(Boolean).length / bucket.successes.length;
      expect(row.count).toBe(bucket.likerts.length);
      expect(row.mean_likert).toBeCloseTo(meanLikert, 10);
      expect(row.success_rate).toBeCloseTo(successRate, 10);
    }
    expect(report.per_relation.left.count).toBe(2);
    expect(report.per_relation.left.mean_likert).toBeCloseTo(6.5, 10);
  }, 60_000);

  it("surfaces parse failures as structured 422s", async () => {
    const client = new RelplaceClient(BASE);
    const sid = await client.createSession();
    await client.addObject(sid, "box", [48, 70]);
    try {
      await client.instruct(sid, "put the can near the box");
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(422);
      expect(((err as ApiError).payload as { error: string }).error)
        .toBe("unrecognized_relation");
    }
  }, 30_000);
});
