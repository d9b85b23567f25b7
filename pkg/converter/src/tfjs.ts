/**
 * TensorFlow.js layers-model adapter: reads model.json + weight shards
 * directly (no runtime needed) and dumps the framework-neutral manifest
 * plus raw float32 blobs that convertManifest() consumes.
 *
 * Supports Sequential models made of Conv2D, MaxPooling2D,
 * AveragePooling2D, Flatten, Dense, Activation(relu/softmax), ReLU and
 * Dropout layers in channels_last format.  Dense kernels that consume a
 * flattened feature map are row-permuted from the (h, w, c) flattening
 * order to the engine's (c, h, w) order.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ConvertError, Manifest, ManifestLayer } from "./manifest.js";

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface FeatureMap {
  c: number;
  h: number;
  w: number;
  flat: boolean; // true once a Flatten has been applied
}

function loadWeights(modelDir: string, groups: any[]): Map<string, Float32Array> {
  const out = new Map<string, Float32Array>();
  for (const group of groups) {
    const buffers = (group.paths as string[]).map((p) =>
      fs.readFileSync(path.join(modelDir, p)),
    );
    const data = Buffer.concat(buffers);
    let offset = 0;
    for (const spec of group.weights as WeightSpec[]) {
      const count = spec.shape.reduce((a: number, b: number) => a * b, 1);
      if (spec.dtype !== "float32") {
        throw new ConvertError(`weight '${spec.name}': unsupported dtype '${spec.dtype}'`);
      }
      const aligned = new ArrayBuffer(count * 4);
      new Uint8Array(aligned).set(data.subarray(offset, offset + count * 4));
      out.set(spec.name, new Float32Array(aligned));
      offset += count * 4;
    }
  }
  return out;
}

function findWeight(
  weights: Map<string, Float32Array>, layerName: string, kind: "kernel" | "bias",
): Float32Array {
  const exact = weights.get(`${layerName}/${kind}`);
  if (exact) return exact;
  const matches = [...weights.keys()].filter((k) => k.endsWith(`/${layerName}/${kind}`));
  if (matches.length === 1) return weights.get(matches[0])!;
  throw new ConvertError(`cannot find ${kind} weights for layer '${layerName}'`);
}

function fitOrThrow(extent: number, window: number, pad: number, stride: number, name: string): number {
  const span = extent + 2 * pad - window;
  if (span < 0 || span % stride !== 0) {
    throw new ConvertError(
      `layer '${name}': geometry ${extent}+2*${pad} with window ${window}, stride ${stride} ` +
      `does not tile exactly (strict fit)`,
    );
  }
  return span / stride + 1;
}

function samePad(kernel: [number, number], strides: [number, number], name: string): number {
  if (strides[0] !== 1 || strides[1] !== 1 || kernel[0] !== kernel[1] || kernel[0] % 2 === 0) {
    throw new ConvertError(
      `layer '${name}': padding 'same' is only supported for stride 1 and odd square kernels`,
    );
  }
  return (kernel[0] - 1) / 2;
}

function pair(v: unknown, fallback?: [number, number]): [number, number] {
  if (Array.isArray(v) && v.length === 2) return [v[0], v[1]];
  if (typeof v === "number") return [v, v];
  if (fallback) return fallback;
  throw new ConvertError(`expected a 2-element size, got ${JSON.stringify(v)}`);
}

/** (kh, kw, inC, outC) -> (outC, inC, kh, kw), both row-major. */
export function transposeConvKernel(src: Float32Array, kh: number, kw: number, inC: number, outC: number): Float32Array {
  const dst = new Float32Array(src.length);
  for (let i = 0; i < kh; i++)
    for (let j = 0; j < kw; j++)
      for (let c = 0; c < inC; c++)
        for (let k = 0; k < outC; k++)
          dst[((k * inC + c) * kh + i) * kw + j] = src[((i * kw + j) * inC + c) * outC + k];
  return dst;
}

/** Dense kernel (inF, outF) -> (outF, inF), remapping flattened-input rows
 *  from (h, w, c) order to (c, h, w) order when the input was spatial. */
export function transposeDenseKernel(src: Float32Array, inF: number, outF: number, fm: FeatureMap | null): Float32Array {
  const dst = new Float32Array(src.length);
  for (let i = 0; i < inF; i++) {
    let row = i;
    if (fm) {
      const c = i % fm.c;
      const x = Math.floor(i / fm.c) % fm.w;
      const y = Math.floor(i / (fm.c * fm.w));
      row = (c * fm.h + y) * fm.w + x;
    }
    for (let o = 0; o < outF; o++) dst[o * inF + row] = src[i * outF + o];
  }
  return dst;
}

export interface DumpResult {
  manifestPath: string;
  layers: ManifestLayer[];
}

export function dumpTfjsModel(
  modelJsonPath: string,
  outDir: string,
  inputShape?: [number, number, number],
): DumpResult {
  const modelDir = path.dirname(path.resolve(modelJsonPath));
  const model = JSON.parse(fs.readFileSync(modelJsonPath, "utf-8"));
  const config = model?.modelTopology?.model_config;
  if (!config || config.class_name !== "Sequential") {
    throw new ConvertError("only Sequential layers-models are supported");
  }
  const weights = loadWeights(modelDir, model.weightsManifest ?? []);
  fs.mkdirSync(outDir, { recursive: true });

  let fm: FeatureMap | null = null;
  if (inputShape) fm = { c: inputShape[0], h: inputShape[1], w: inputShape[2], flat: false };
  let flattenedFrom: FeatureMap | null = null;
  let flatFeatures = 0;
  const layers: ManifestLayer[] = [];
  const blobs: Array<[string, Float32Array]> = [];

  const setInputFromBatchShape = (batchShape: unknown) => {
    if (Array.isArray(batchShape) && batchShape.length === 4) {
      fm = { c: batchShape[3], h: batchShape[1], w: batchShape[2], flat: false };
    }
  };

  for (const layer of config.config.layers) {
    const cls = layer.class_name as string;
    const cfg = layer.config ?? {};
    const name = (cfg.name as string) ?? cls.toLowerCase();
    if (cfg.batch_input_shape) setInputFromBatchShape(cfg.batch_input_shape);

    if (cls === "InputLayer") continue;
    if (cls === "Dropout") continue;

    if (cls === "Conv2D") {
      if (!fm) throw new ConvertError("input shape unknown; model lacks batch_input_shape");
      if ((cfg.data_format ?? "channels_last") !== "channels_last") {
        throw new ConvertError(`layer '${name}': only channels_last is supported`);
      }
      const dil = pair(cfg.dilation_rate ?? [1, 1]);
      if (dil[0] !== 1 || dil[1] !== 1) {
        throw new ConvertError(`layer '${name}': dilation is not supported`);
      }
      const kernel = pair(cfg.kernel_size);
      const strides = pair(cfg.strides ?? [1, 1]);
      if (strides[0] !== strides[1]) {
        throw new ConvertError(`layer '${name}': anisotropic strides are not supported`);
      }
      const groups: number = cfg.groups ?? 1;
      const pad = cfg.padding === "same" ? samePad(kernel, strides, name)
        : cfg.padding === "valid" || cfg.padding === undefined ? 0
        : (() => { throw new ConvertError(`layer '${name}': unsupported padding '${cfg.padding}'`); })();
      const activation = cfg.activation ?? "linear";
      if (activation !== "linear" && activation !== "relu") {
        throw new ConvertError(`layer '${name}': unsupported conv activation '${activation}'`);
      }

      const raw = findWeight(weights, name, "kernel");
      const outC: number = cfg.filters;
      const inC = fm.c / groups;
      if (raw.length !== kernel[0] * kernel[1] * inC * outC) {
        throw new ConvertError(`layer '${name}': kernel has ${raw.length} values, expected ${kernel[0] * kernel[1] * inC * outC}`);
      }
      const kernelOurs = transposeConvKernel(raw, kernel[0], kernel[1], inC, outC);
      const bias = cfg.use_bias === false
        ? new Float32Array(outC)
        : findWeight(weights, name, "bias");

      blobs.push([`${name}.weight.bin`, kernelOurs], [`${name}.bias.bin`, bias]);
      layers.push({
        name, kind: "conv",
        weight_shape: [outC, inC, kernel[0], kernel[1]],
        weight_blob: `${name}.weight.bin`, bias_blob: `${name}.bias.bin`,
        pad, stride: strides[0], group: groups, fused_relu: activation === "relu",
      });
      fm = {
        c: outC,
        h: fitOrThrow(fm.h, kernel[0], pad, strides[0], name),
        w: fitOrThrow(fm.w, kernel[1], pad, strides[0], name),
        flat: false,
      };
      continue;
    }

    if (cls === "MaxPooling2D" || cls === "AveragePooling2D") {
      if (!fm) throw new ConvertError("input shape unknown; model lacks batch_input_shape");
      if (cfg.padding && cfg.padding !== "valid") {
        throw new ConvertError(`layer '${name}': only 'valid' pooling padding is supported`);
      }
      const size = pair(cfg.pool_size ?? [2, 2]);
      const strides = pair(cfg.strides ?? size, size);
      if (strides[0] !== strides[1]) {
        throw new ConvertError(`layer '${name}': anisotropic pool strides are not supported`);
      }
      layers.push({
        name, kind: "pool", kernel_h: size[0], kernel_w: size[1],
        stride: strides[0], pool_mode: cls === "MaxPooling2D" ? "max" : "mean",
      });
      fm = {
        c: fm.c,
        h: fitOrThrow(fm.h, size[0], 0, strides[0], name),
        w: fitOrThrow(fm.w, size[1], 0, strides[0], name),
        flat: false,
      };
      continue;
    }

    if (cls === "Flatten") {
      if (!fm) throw new ConvertError("input shape unknown; model lacks batch_input_shape");
      flattenedFrom = fm.h * fm.w > 1 ? { ...fm } : null;
      flatFeatures = fm.c * fm.h * fm.w;
      fm = { c: flatFeatures, h: 1, w: 1, flat: true };
      continue;
    }

    if (cls === "Dense") {
      if (!fm) throw new ConvertError("input shape unknown; model lacks batch_input_shape");
      if (!fm.flat && fm.h * fm.w > 1) {
        throw new ConvertError(`layer '${name}': Dense on a non-flattened spatial input is not supported`);
      }
      const inF = fm.flat ? flatFeatures : fm.c * fm.h * fm.w;
      const outF: number = cfg.units;
      const raw = findWeight(weights, name, "kernel");
      if (raw.length !== inF * outF) {
        throw new ConvertError(`layer '${name}': kernel has ${raw.length} values, expected ${inF * outF}`);
      }
      const kernelOurs = transposeDenseKernel(raw, inF, outF, flattenedFrom);
      const bias = cfg.use_bias === false ? new Float32Array(outF) : findWeight(weights, name, "bias");
      const activation = cfg.activation ?? "linear";
      if (!["linear", "relu", "softmax"].includes(activation)) {
        throw new ConvertError(`layer '${name}': unsupported dense activation '${activation}'`);
      }

      blobs.push([`${name}.weight.bin`, kernelOurs], [`${name}.bias.bin`, bias]);
      layers.push({
        name, kind: "fc", weight_shape: [outF, inF, 1, 1],
        weight_blob: `${name}.weight.bin`, bias_blob: `${name}.bias.bin`,
        fused_relu: activation === "relu",
      });
      if (activation === "softmax") {
        layers.push({ name: `${name}_softmax`, kind: "softmax" });
      }
      fm = { c: outF, h: 1, w: 1, flat: true };
      flattenedFrom = null;
      flatFeatures = outF;
      continue;
    }

    if (cls === "ReLU" || (cls === "Activation" && cfg.activation === "relu")) {
      layers.push({ name, kind: "relu" });
      continue;
    }
    if (cls === "Activation" && cfg.activation === "softmax") {
      layers.push({ name, kind: "softmax" });
      continue;
    }

    throw new ConvertError(`unsupported layer type '${cls}' (layer '${name}')`);
  }

  if (!fm) throw new ConvertError("input shape unknown; model lacks batch_input_shape");

  const first = config.config.layers.find((l: any) => l.config?.batch_input_shape);
  const batchShape = first?.config?.batch_input_shape;
  const input: [number, number, number] = inputShape
    ?? [batchShape[3], batchShape[1], batchShape[2]];

  for (const [fname, data] of blobs) {
    fs.writeFileSync(path.join(outDir, fname), Buffer.from(data.buffer, data.byteOffset, data.byteLength));
  }
  const manifest: Manifest = {
    name: (config.config.name as string) ?? "tfjs-model",
    input_shape: input,
    layers,
  };
  const manifestPath = path.join(outDir, "manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { manifestPath, layers };
}
