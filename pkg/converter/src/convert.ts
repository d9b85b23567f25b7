/**
 * manifest + raw float32 blobs -> engine model directory
 * (model_param_<layer>.msg files plus a net.netfile skeleton).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ConvertError, Manifest, validateManifest } from "./manifest.js";
import { encodeLayerParams } from "./msgpack.js";
import { emitNetfile, paramFileName } from "./netfile.js";

export function readFloat32Blob(blobPath: string, expected: number, what: string): Float32Array {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(blobPath);
  } catch (e) {
    throw new ConvertError(`${what}: cannot read '${blobPath}': ${(e as Error).message}`);
  }
  if (buf.length % 4 !== 0) {
    throw new ConvertError(`${what}: blob '${blobPath}' length ${buf.length} is not a multiple of 4`);
  }
  const got = buf.length / 4;
  if (got !== expected) {
    throw new ConvertError(`${what}: expected ${expected} values, blob '${blobPath}' has ${got}`);
  }
  // copy so the view is aligned regardless of Buffer pooling
  const aligned = new ArrayBuffer(buf.length);
  new Uint8Array(aligned).set(buf);
  return new Float32Array(aligned); // little-endian hosts only (documented)
}

export interface ConvertResult {
  netfile: string;
  paramFiles: string[];
}

export function convertManifest(manifestPath: string, outDir: string): ConvertResult {
  let parsed: unknown;
  try {
    parsed = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  } catch (e) {
    throw new ConvertError(`cannot read manifest '${manifestPath}': ${(e as Error).message}`);
  }
  const manifest: Manifest = validateManifest(parsed);
  const baseDir = path.dirname(path.resolve(manifestPath));
  fs.mkdirSync(outDir, { recursive: true });

  const paramFiles: string[] = [];
  for (const layer of manifest.layers) {
    if (layer.kind !== "conv" && layer.kind !== "fc") continue;
    const shape = layer.weight_shape!;
    const count = shape.reduce((a, b) => a * b, 1);
    const weight = readFloat32Blob(
      path.resolve(baseDir, layer.weight_blob!), count, `layer '${layer.name}' weight`,
    );
    const bias = readFloat32Blob(
      path.resolve(baseDir, layer.bias_blob!), shape[0], `layer '${layer.name}' bias`,
    );
    const outPath = path.join(outDir, paramFileName(layer.name));
    fs.writeFileSync(outPath, encodeLayerParams({ shape, weight, bias }));
    paramFiles.push(outPath);
  }

  const netfilePath = path.join(outDir, "net.netfile");
  fs.writeFileSync(netfilePath, emitNetfile(manifest));
  return { netfile: netfilePath, paramFiles };
}
