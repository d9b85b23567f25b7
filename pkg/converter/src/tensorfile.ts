/** Engine tensor files: 4 little-endian uint32 dims, then float32 data. */

import * as fs from "node:fs";

export function writeTensor(
  path: string, dims: [number, number, number, number], data: Float32Array,
): void {
  const count = dims.reduce((a, b) => a * b, 1);
  if (data.length !== count) {
    throw new Error(`tensor data has ${data.length} values, dims expect ${count}`);
  }
  const buf = Buffer.alloc(16 + count * 4);
  dims.forEach((d, i) => buf.writeUInt32LE(d, i * 4));
  for (let i = 0; i < count; i++) buf.writeFloatLE(data[i], 16 + i * 4);
  fs.writeFileSync(path, buf);
}

export function readTensor(path: string): { dims: number[]; data: Float32Array } {
  const buf = fs.readFileSync(path);
  const dims = [0, 1, 2, 3].map((i) => buf.readUInt32LE(i * 4));
  const count = dims.reduce((a, b) => a * b, 1);
  if (buf.length !== 16 + count * 4) {
    throw new Error(`tensor file ${path}: expected ${16 + count * 4} bytes, got ${buf.length}`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(16 + i * 4);
  return { dims, data };
}
