import { program } from "commander";

import { convertManifest } from "./convert.js";
import { ConvertError } from "./manifest.js";
import { dumpTfjsModel } from "./tfjs.js";

program
  .name("cnnkit-convert")
  .description("Convert trained-model weights into engine parameter files and a NetFile");

program
  .command("convert")
  .argument("<manifest>", "manifest JSON path (see docs/formats.md)")
  .argument("<out_dir>", "output model directory")
  .action((manifest: string, outDir: string) => {
    const result = convertManifest(manifest, outDir);
    console.log(`netfile=${result.netfile}`);
    for (const f of result.paramFiles) console.log(`param_file=${f}`);
  });

program
  .command("dump-tfjs")
  .argument("<model_json>", "TensorFlow.js layers-model model.json")
  .argument("<out_dir>", "output directory for manifest + blobs")
  .option("--input-shape <c,h,w>", "input geometry when the model omits batch_input_shape")
  .action((modelJson: string, outDir: string, opts: { inputShape?: string }) => {
    let shape: [number, number, number] | undefined;
    if (opts.inputShape) {
      const parts = opts.inputShape.split(",").map((p) => parseInt(p, 10));
      if (parts.length !== 3 || parts.some((p) => !Number.isInteger(p) || p < 1)) {
        throw new ConvertError(`--input-shape expects C,H,W, got '${opts.inputShape}'`);
      }
      shape = parts as [number, number, number];
    }
    const result = dumpTfjsModel(modelJson, outDir, shape);
    console.log(`manifest=${result.manifestPath}`);
    console.log(`layers=${result.layers.length}`);
  });

try {
  program.parse();
} catch (e) {
  if (e instanceof ConvertError) {
    console.error(`error: ${e.message}`);
    process.exit(1);
  }
  throw e;
}
