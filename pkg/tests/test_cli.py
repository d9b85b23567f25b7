import numpy as np
import pytest

from cnnkit import Shape4, Tensor, zoo
from cnnkit.cli import main
from cnnkit.engine import PROFILE_FILENAME
from cnnkit.tensorio import read_tensor, write_tensor
from conftest import GOLDEN_DIR, rand_tensor
import oracles


def lenet_oracle_calls(params):
    """Float64 reference pipeline matching golden/lenet.netfile."""
    return [
        ("conv", dict(w4=params["conv1"].weight.view4(), bias=params["conv1"].bias,
                      pad=0, stride=1, group=1)),
        ("pool", dict(kh=2, kw=2, stride=2, mode="max")),
        ("conv", dict(w4=params["conv2"].weight.view4(), bias=params["conv2"].bias,
                      pad=0, stride=1, group=1)),
        ("pool", dict(kh=2, kw=2, stride=2, mode="max")),
        ("fc", dict(w2=params["fc1"].weight.view4(), bias=params["fc1"].bias, fused_relu=True)),
        ("fc", dict(w2=params["fc2"].weight.view4(), bias=params["fc2"].bias)),
    ]


@pytest.fixture
def lenet_dir(tmp_path):
    model_dir = tmp_path / "model"
    params = zoo.write_random_model("lenet", model_dir, seed=11)
    return model_dir, params


def netfile_path():
    return str(GOLDEN_DIR / "lenet.netfile")


def write_batch(path, rng, n=2):
    batch = rand_tensor(rng, n, 1, 28, 28)
    write_tensor(path, batch)
    return batch


def test_tensor_file_round_trip(tmp_path, rng):
    t = rand_tensor(rng, 2, 3, 4, 5)
    path = tmp_path / "t.tensor"
    write_tensor(path, t)
    back = read_tensor(path)
    assert back.shape == t.shape
    assert back.data.tobytes() == t.data.tobytes()


def test_run_zero_batch_smoke(lenet_dir, tmp_path, capsys):
    model_dir, _ = lenet_dir
    inp, outp = tmp_path / "in.tensor", tmp_path / "out.tensor"
    write_tensor(inp, Tensor.from_array(np.zeros((2, 1, 28, 28), np.float32)))
    rc = main(["run", netfile_path(), str(model_dir), str(inp), str(outp)])
    assert rc == 0
    out = read_tensor(outp)
    assert out.shape == Shape4(2, 10, 1, 1)
    err = capsys.readouterr().err
    assert "total_ms=" in err and "conv1_ms=" in err


def test_run_missing_param_file_names_layer(lenet_dir, tmp_path, capsys):
    model_dir, _ = lenet_dir
    (model_dir / "model_param_conv2.msg").unlink()
    inp, outp = tmp_path / "in.tensor", tmp_path / "out.tensor"
    write_batch(inp, np.random.default_rng(0))
    rc = main(["run", netfile_path(), str(model_dir), str(inp), str(outp)])
    assert rc == 2
    assert "conv2" in capsys.readouterr().err


def test_run_modes_byte_identical(lenet_dir, tmp_path, rng):
    model_dir, _ = lenet_dir
    inp = tmp_path / "in.tensor"
    write_batch(inp, rng)
    out_seq, out_par = tmp_path / "seq.tensor", tmp_path / "par.tensor"
    assert main(["run", netfile_path(), str(model_dir), str(inp), str(out_seq), "--mode", "sequential"]) == 0
    assert main(["run", netfile_path(), str(model_dir), str(inp), str(out_par), "--mode", "parallel"]) == 0
    assert out_seq.read_bytes() == out_par.read_bytes()


def test_verify_against_own_output(lenet_dir, tmp_path, rng, capsys):
    model_dir, _ = lenet_dir
    inp, outp = tmp_path / "in.tensor", tmp_path / "out.tensor"
    write_batch(inp, rng)
    assert main(["run", netfile_path(), str(model_dir), str(inp), str(outp)]) == 0
    rc = main(["verify", netfile_path(), str(model_dir), str(inp), str(outp)])
    assert rc == 0
    assert "mse=0.000000e+00" in capsys.readouterr().out


def test_verify_against_float64_oracle(lenet_dir, tmp_path, rng):
    model_dir, params = lenet_dir
    batch = rand_tensor(rng, 4, 1, 28, 28)
    inp, ref = tmp_path / "in.tensor", tmp_path / "ref.tensor"
    write_tensor(inp, batch)
    want = oracles.compose_ref(lenet_oracle_calls(params), batch.view4())
    write_tensor(ref, Tensor.from_array(want.astype(np.float32)))
    assert main(["verify", netfile_path(), str(model_dir), str(inp), str(ref)]) == 0


def test_verify_perturbed_reference_fails(lenet_dir, tmp_path, rng):
    model_dir, _ = lenet_dir
    inp, outp = tmp_path / "in.tensor", tmp_path / "out.tensor"
    write_batch(inp, rng)
    main(["run", netfile_path(), str(model_dir), str(inp), str(outp)])
    ref = read_tensor(outp)
    bad = ref.view4().copy()
    bad[0, 0, 0, 0] += 1.0
    write_tensor(outp, Tensor.from_array(bad))
    assert main(["verify", netfile_path(), str(model_dir), str(inp), str(outp)]) == 1


def test_verify_threshold_flag(lenet_dir, tmp_path, rng):
    model_dir, _ = lenet_dir
    inp, outp = tmp_path / "in.tensor", tmp_path / "out.tensor"
    write_batch(inp, rng)
    main(["run", netfile_path(), str(model_dir), str(inp), str(outp)])
    ref = read_tensor(outp)
    bad = ref.view4().copy()
    bad += 1e-4
    write_tensor(outp, Tensor.from_array(bad))
    assert main(["verify", netfile_path(), str(model_dir), str(inp), str(outp)]) == 1
    assert main([
        "verify", netfile_path(), str(model_dir), str(inp), str(outp), "--threshold", "1.0",
    ]) == 0


def test_benchmark_reports_speedup(lenet_dir, capsys):
    model_dir, _ = lenet_dir
    rc = main([
        "benchmark", netfile_path(), str(model_dir),
        "--input-shape", "1,28,28", "--batch", "2", "--reps", "3",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "sequential_ms_per_image=" in out
    assert "parallel_ms_per_image=" in out
    assert "speedup=" in out
    assert "reps=3" in out


def test_benchmark_sequential_vs_itself_is_one(lenet_dir, capsys):
    model_dir, _ = lenet_dir
    rc = main([
        "benchmark", netfile_path(), str(model_dir),
        "--input-shape", "1,28,28", "--batch", "1", "--reps", "3", "--mode", "sequential",
    ])
    assert rc == 0
    assert "speedup=1.000" in capsys.readouterr().out


MICRO_NETFILE = """
allocated_ram: 16
execution_mode: parallel
auto_tuning: {auto_tuning}

layer {{
  kind: conv
  name: conv1
  params_file: model_param_conv1.msg
  pad: 1
  fused_relu: true
}}

layer {{
  kind: fc
  name: fc1
  params_file: model_param_fc1.msg
}}
"""


@pytest.fixture
def micro_dir(tmp_path, rng):
    """Tiny conv+fc model on 4x4 inputs; full-grid tuning finishes fast."""
    from cnnkit.modelstore import PARAM_FILE_TEMPLATE, write_layer_params
    from conftest import rand_conv_params, rand_fc_params

    model_dir = tmp_path / "micro"
    model_dir.mkdir()
    write_layer_params(
        model_dir / PARAM_FILE_TEMPLATE.format(name="conv1"), rand_conv_params(rng, 2, 1, 3, 3)
    )
    write_layer_params(
        model_dir / PARAM_FILE_TEMPLATE.format(name="fc1"), rand_fc_params(rng, 3, 2 * 4 * 4)
    )
    return model_dir


def micro_netfile(tmp_path, auto_tuning):
    path = tmp_path / f"micro_{auto_tuning}.netfile"
    path.write_text(MICRO_NETFILE.format(auto_tuning=auto_tuning))
    return str(path)


def test_tune_refuses_when_disabled(micro_dir, tmp_path, capsys):
    nf = micro_netfile(tmp_path, "off")
    rc = main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4"])
    assert rc == 2
    assert "auto_tuning is off" in capsys.readouterr().err


def test_tune_writes_profile_then_skips(micro_dir, tmp_path, capsys):
    nf = micro_netfile(tmp_path, "on")
    rc = main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4", "--reps", "3"])
    assert rc == 0
    assert (micro_dir / PROFILE_FILENAME).exists()
    out = capsys.readouterr().out
    assert out.count("candidate ") == 36
    assert "chosen_rows_per_item=" in out

    rc = main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4"])
    assert rc == 0
    assert "already_tuned=true" in capsys.readouterr().out


def test_tune_force_reruns(micro_dir, tmp_path, capsys):
    nf = micro_netfile(tmp_path, "on")
    assert main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4", "--reps", "3"]) == 0
    capsys.readouterr()
    rc = main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4", "--reps", "3", "--force"])
    assert rc == 0
    assert "candidate " in capsys.readouterr().out


def test_tune_force_overrides_disabled(micro_dir, tmp_path):
    nf = micro_netfile(tmp_path, "off")
    rc = main(["tune", nf, str(micro_dir), "--input-shape", "1,4,4", "--reps", "3", "--force"])
    assert rc == 0


def test_first_run_tunes_exactly_once(micro_dir, tmp_path, rng, capsys):
    nf = micro_netfile(tmp_path, "on")
    inp = tmp_path / "in.tensor"
    write_tensor(inp, rand_tensor(rng, 2, 1, 4, 4))
    out1, out2 = tmp_path / "o1.tensor", tmp_path / "o2.tensor"

    assert main(["run", nf, str(micro_dir), str(inp), str(out1)]) == 0
    first_err = capsys.readouterr().err
    assert "auto_tuning=first_run" in first_err
    assert (micro_dir / PROFILE_FILENAME).exists()

    assert main(["run", nf, str(micro_dir), str(inp), str(out2)]) == 0
    second_err = capsys.readouterr().err
    assert "auto_tuning=first_run" not in second_err
    # tuning is semantically neutral, so both runs agree bitwise
    assert out1.read_bytes() == out2.read_bytes()


def test_unknown_netfile_is_operational_error(tmp_path, capsys):
    rc = main(["run", str(tmp_path / "nope.netfile"), str(tmp_path), "a", "b"])
    assert rc == 2
