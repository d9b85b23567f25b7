/**
 * Writer for the engine's MessagePack parameter-file schema:
 * a map {shape: [4 uints], weight: [float32...], bias: [float32...]}
 * with canonical smallest encodings and every float emitted as the
 * MessagePack float-32 type (0xca), so payloads round-trip bitwise.
 */

export interface LayerParams {
  shape: [number, number, number, number];
  weight: Float32Array;
  bias: Float32Array;
}

export class MsgpackError extends Error {}

class ByteWriter {
  private buf: Uint8Array;
  private view: DataView;
  private len = 0;

  constructor(capacity: number) {
    this.buf = new Uint8Array(capacity);
    this.view = new DataView(this.buf.buffer);
  }

  private grow(extra: number) {
    if (this.len + extra <= this.buf.length) return;
    const next = new Uint8Array(Math.max(this.buf.length * 2, this.len + extra));
    next.set(this.buf.subarray(0, this.len));
    this.buf = next;
    this.view = new DataView(next.buffer);
  }

  u8(v: number) {
    this.grow(1);
    this.buf[this.len++] = v;
  }

  u16(v: number) {
    this.grow(2);
    this.view.setUint16(this.len, v);
    this.len += 2;
  }

  u32(v: number) {
    this.grow(4);
    this.view.setUint32(this.len, v);
    this.len += 4;
  }

  f32(v: number) {
    this.grow(5);
    this.buf[this.len++] = 0xca;
    this.view.setFloat32(this.len, v); // big-endian per MessagePack
    this.len += 4;
  }

  bytes(): Uint8Array {
    return this.buf.subarray(0, this.len);
  }
}

function packUint(w: ByteWriter, n: number) {
  if (!Number.isInteger(n) || n < 0) {
    throw new MsgpackError(`expected an unsigned integer, got ${n}`);
  }
  if (n < 0x80) w.u8(n);
  else if (n < 0x100) {
    w.u8(0xcc);
    w.u8(n);
  } else if (n < 0x10000) {
    w.u8(0xcd);
    w.u16(n);
  } else {
    w.u8(0xce);
    w.u32(n);
  }
}

function packStr(w: ByteWriter, s: string) {
  const bytes = new TextEncoder().encode(s);
  if (bytes.length >= 32) throw new MsgpackError("schema keys are short fixstrs");
  w.u8(0xa0 | bytes.length);
  for (const b of bytes) w.u8(b);
}

function packArrayHeader(w: ByteWriter, n: number) {
  if (n < 16) w.u8(0x90 | n);
  else if (n < 0x10000) {
    w.u8(0xdc);
    w.u16(n);
  } else {
    w.u8(0xdd);
    w.u32(n);
  }
}

function packFloat32Array(w: ByteWriter, values: Float32Array) {
  packArrayHeader(w, values.length);
  for (let i = 0; i < values.length; i++) w.f32(values[i]);
}

export function encodeLayerParams(p: LayerParams): Uint8Array {
  const count = p.shape.reduce((a, b) => a * b, 1);
  if (p.weight.length !== count) {
    throw new MsgpackError(
      `weight has ${p.weight.length} values, shape [${p.shape.join(", ")}] expects ${count}`,
    );
  }
  if (p.bias.length !== p.shape[0]) {
    throw new MsgpackError(`bias has ${p.bias.length} values, expected ${p.shape[0]}`);
  }
  const w = new ByteWriter(16 + 5 * (p.weight.length + p.bias.length) + 32);
  w.u8(0x83); // map of 3
  packStr(w, "shape");
  packArrayHeader(w, 4);
  for (const d of p.shape) packUint(w, d);
  packStr(w, "weight");
  packFloat32Array(w, p.weight);
  packStr(w, "bias");
  packFloat32Array(w, p.bias);
  return w.bytes();
}
