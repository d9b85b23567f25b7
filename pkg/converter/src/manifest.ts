/**
 * Framework-neutral interchange manifest: layer descriptions plus paths to
 * raw little-endian float32 weight/bias blobs.  See docs/formats.md at the
 * repository root for the schema.
 */

export const LAYER_KINDS = ["conv", "pool", "fc", "relu", "lrn", "softmax"] as const;
export type LayerKind = (typeof LAYER_KINDS)[number];

export interface ManifestLayer {
  name: string;
  kind: LayerKind;
  weight_shape?: [number, number, number, number];
  weight_blob?: string;
  bias_blob?: string;
  pad?: number;
  stride?: number;
  group?: number;
  fused_relu?: boolean;
  kernel_h?: number;
  kernel_w?: number;
  pool_mode?: "max" | "mean";
  lrn_n?: number;
  lrn_alpha?: number;
  lrn_beta?: number;
  lrn_k?: number;
}

export interface Manifest {
  name: string;
  input_shape: [number, number, number];
  layers: ManifestLayer[];
  allocated_ram?: number;
  execution_mode?: "sequential" | "parallel";
  auto_tuning?: "on" | "off";
}

export class ConvertError extends Error {}

function need(cond: unknown, message: string): asserts cond {
  if (!cond) throw new ConvertError(message);
}

function isPosInt(v: unknown, min = 1): v is number {
  return typeof v === "number" && Number.isInteger(v) && v >= min;
}

export function validateManifest(raw: unknown): Manifest {
  need(typeof raw === "object" && raw !== null, "manifest must be a JSON object");
  const m = raw as Record<string, unknown>;
  need(typeof m.name === "string" && m.name.length > 0, "manifest needs a 'name' string");
  need(
    Array.isArray(m.input_shape) && m.input_shape.length === 3 && m.input_shape.every((d) => isPosInt(d)),
    "manifest 'input_shape' must be [c, h, w] positive ints",
  );
  need(Array.isArray(m.layers) && m.layers.length > 0, "manifest needs a non-empty 'layers' array");

  const seen = new Set<string>();
  const layers = (m.layers as unknown[]).map((rawLayer, idx) => {
    need(typeof rawLayer === "object" && rawLayer !== null, `layer ${idx}: must be an object`);
    const l = rawLayer as Record<string, unknown>;
    need(typeof l.name === "string" && l.name.length > 0, `layer ${idx}: needs a 'name'`);
    const name = l.name as string;
    need(!seen.has(name), `duplicate layer name '${name}'`);
    seen.add(name);
    need(
      typeof l.kind === "string" && (LAYER_KINDS as readonly string[]).includes(l.kind),
      `layer '${name}': unknown layer kind '${String(l.kind)}'`,
    );
    const kind = l.kind as LayerKind;

    if (kind === "conv" || kind === "fc") {
      need(
        Array.isArray(l.weight_shape) && l.weight_shape.length === 4 && l.weight_shape.every((d) => isPosInt(d)),
        `layer '${name}': 'weight_shape' must be 4 positive ints`,
      );
      need(typeof l.weight_blob === "string", `layer '${name}': needs 'weight_blob'`);
      need(typeof l.bias_blob === "string", `layer '${name}': needs 'bias_blob'`);
    }
    if (kind === "pool") {
      need(isPosInt(l.kernel_h) && isPosInt(l.kernel_w), `layer '${name}': pool needs kernel_h/kernel_w`);
      need(l.pool_mode === "max" || l.pool_mode === "mean", `layer '${name}': pool_mode must be max or mean`);
    }
    if (kind === "lrn") {
      need(isPosInt(l.lrn_n) && (l.lrn_n as number) % 2 === 1, `layer '${name}': lrn_n must be an odd int`);
      for (const key of ["lrn_alpha", "lrn_beta", "lrn_k"]) {
        need(typeof l[key] === "number", `layer '${name}': missing ${key}`);
      }
    }
    return l as unknown as ManifestLayer;
  });

  return {
    name: m.name as string,
    input_shape: m.input_shape as [number, number, number],
    layers,
    allocated_ram: (m.allocated_ram as number | undefined) ?? 0,
    execution_mode: (m.execution_mode as Manifest["execution_mode"]) ?? "parallel",
    auto_tuning: (m.auto_tuning as Manifest["auto_tuning"]) ?? "off",
  };
}
