/** NetFile emitter; the grammar is documented in docs/netfile.md. */

import type { Manifest, ManifestLayer } from "./manifest.js";

export function paramFileName(layerName: string): string {
  return `model_param_${layerName}.msg`;
}

function layerBlock(l: ManifestLayer): string[] {
  const lines = ["layer {", `  kind: ${l.kind}`, `  name: ${l.name}`];
  if (l.kind === "conv" || l.kind === "fc") {
    lines.push(`  params_file: ${paramFileName(l.name)}`);
    lines.push(`  fused_relu: ${l.fused_relu ? "true" : "false"}`);
  }
  if (l.kind === "conv") {
    lines.push(`  pad: ${l.pad ?? 0}`);
    lines.push(`  stride: ${l.stride ?? 1}`);
    lines.push(`  group: ${l.group ?? 1}`);
  }
  if (l.kind === "pool") {
    lines.push(`  kernel_h: ${l.kernel_h}`);
    lines.push(`  kernel_w: ${l.kernel_w}`);
    lines.push(`  stride: ${l.stride ?? 1}`);
    lines.push(`  pool_mode: ${l.pool_mode}`);
  }
  if (l.kind === "lrn") {
    lines.push(`  lrn_n: ${l.lrn_n}`);
    lines.push(`  lrn_alpha: ${l.lrn_alpha}`);
    lines.push(`  lrn_beta: ${l.lrn_beta}`);
    lines.push(`  lrn_k: ${l.lrn_k}`);
  }
  lines.push("}");
  return lines;
}

export function emitNetfile(manifest: Manifest): string {
  const [c, h, w] = manifest.input_shape;
  const lines = [
    `# generated from manifest '${manifest.name}'`,
    `# expected input geometry: ${c} channels, ${h}x${w} (validate with batch shape n,${c},${h},${w})`,
    `allocated_ram: ${manifest.allocated_ram ?? 0}`,
    `execution_mode: ${manifest.execution_mode ?? "parallel"}`,
    `auto_tuning: ${manifest.auto_tuning ?? "off"}`,
    "",
  ];
  for (const layer of manifest.layers) {
    lines.push(...layerBlock(layer), "");
  }
  return lines.join("\n");
}
