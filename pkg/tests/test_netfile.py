from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnkit import (
    LayerSpec,
    NetConfig,
    NetFileError,
    Shape4,
    ShapeError,
    format_netfile,
    parse_netfile,
    validate_shapes,
)
from conftest import GOLDEN_DIR

MALFORMED_DIR = Path(__file__).parent / "data" / "malformed"

LENET_WEIGHT_SHAPES = {
    "conv1": (20, 1, 5, 5),
    "conv2": (50, 20, 5, 5),
    "fc1": (500, 800, 1, 1),
    "fc2": (10, 500, 1, 1),
}


def test_runtime_parameters_and_single_layer():
    text = """
allocated_ram: 120
execution_mode: parallel
auto_tuning: off

layer {
  kind: conv
  name: conv1
  params_file: model_param_conv1.msg
}
"""
    cfg = parse_netfile(text)
    assert cfg.allocated_ram == 120
    assert cfg.execution_mode == "parallel"
    assert cfg.auto_tuning == "off"
    assert len(cfg.layers) == 1
    spec = cfg.layers[0]
    # defaults applied
    assert (spec.pad, spec.stride, spec.group, spec.fused_relu) == (0, 1, 1, False)


def test_empty_string_is_an_error():
    with pytest.raises(NetFileError, match="no layers defined"):
        parse_netfile("")


def test_missing_runtime_parameters_default_safely():
    cfg = parse_netfile("layer {\n kind: relu\n name: act\n}\n")
    assert cfg.allocated_ram == 0
    assert cfg.execution_mode == "parallel"
    assert cfg.auto_tuning == "off"


def test_golden_lenet():
    cfg = parse_netfile((GOLDEN_DIR / "lenet.netfile").read_text())
    assert [s.kind for s in cfg.layers] == ["conv", "pool", "conv", "pool", "fc", "fc"]
    assert [s.fused_relu for s in cfg.layers if s.kind == "fc"] == [True, False]


def test_golden_alex_cifar10():
    cfg = parse_netfile((GOLDEN_DIR / "alex_cifar10.netfile").read_text())
    assert [s.kind for s in cfg.layers] == [
        "conv", "pool", "conv", "pool", "conv", "pool", "fc", "fc",
    ]
    assert len(cfg.layers) == 8


def test_golden_alexnet_thirteen_layers_in_order():
    cfg = parse_netfile((GOLDEN_DIR / "alexnet.netfile").read_text())
    assert [s.kind for s in cfg.layers] == [
        "conv", "lrn", "pool", "conv", "lrn", "pool",
        "conv", "conv", "conv", "pool", "fc", "fc", "fc",
    ]
    assert all(s.fused_relu for s in cfg.layers if s.kind == "conv")
    names = [s.name for s in cfg.layers]
    assert len(set(names)) == 13


@pytest.mark.parametrize(
    "fixture", sorted(MALFORMED_DIR.glob("*.netfile")), ids=lambda p: p.stem
)
def test_malformed_fixture_gives_line_numbered_diagnostic(fixture):
    with pytest.raises(NetFileError) as exc:
        parse_netfile(fixture.read_text())
    assert isinstance(exc.value.line, int) and exc.value.line >= 1
    assert f"line {exc.value.line}:" in str(exc.value)


def test_error_line_number_points_at_offender():
    text = "allocated_ram: 10\n\nexecution_mode: warp\n"
    with pytest.raises(NetFileError) as exc:
        parse_netfile(text)
    assert exc.value.line == 3


def test_comments_and_whitespace_ignored():
    text = "  allocated_ram: 7   # budget\n# full-line comment\nlayer {\n kind: softmax\n name: out\n}\n"
    cfg = parse_netfile(text)
    assert cfg.allocated_ram == 7
    assert cfg.layers[0].kind == "softmax"


names = st.integers(0, 9)


@st.composite
def layer_specs(draw, index):
    kind = draw(st.sampled_from(("conv", "pool", "fc", "relu", "lrn", "softmax")))
    name = f"{kind}{index}"
    if kind == "conv":
        return LayerSpec(
            kind=kind, name=name, params_file=f"model_param_{name}.msg",
            pad=draw(st.integers(0, 3)), stride=draw(st.integers(1, 3)),
            group=draw(st.integers(1, 4)), fused_relu=draw(st.booleans()),
        )
    if kind == "fc":
        return LayerSpec(
            kind=kind, name=name, params_file=f"model_param_{name}.msg",
            fused_relu=draw(st.booleans()),
        )
    if kind == "pool":
        return LayerSpec(
            kind=kind, name=name, kernel_h=draw(st.integers(1, 4)),
            kernel_w=draw(st.integers(1, 4)), stride=draw(st.integers(1, 3)),
            pool_mode=draw(st.sampled_from(("max", "mean"))),
        )
    if kind == "lrn":
        return LayerSpec(
            kind=kind, name=name, lrn_n=draw(st.integers(0, 3)) * 2 + 1,
            lrn_alpha=draw(st.floats(0, 1, allow_nan=False)),
            lrn_beta=draw(st.floats(0.1, 2, allow_nan=False)),
            lrn_k=draw(st.floats(0.25, 4, allow_nan=False)),
        )
    return LayerSpec(kind=kind, name=name)


@st.composite
def net_configs(draw):
    count = draw(st.integers(1, 6))
    return NetConfig(
        layers=[draw(layer_specs(i)) for i in range(count)],
        allocated_ram=draw(st.integers(0, 1024)),
        execution_mode=draw(st.sampled_from(("sequential", "parallel"))),
        auto_tuning=draw(st.sampled_from(("on", "off"))),
    )


@given(net_configs())
def test_format_parse_round_trip(cfg):
    assert parse_netfile(format_netfile(cfg)) == cfg


@given(net_configs())
def test_order_preserved(cfg):
    parsed = parse_netfile(format_netfile(cfg))
    assert [s.name for s in parsed.layers] == [s.name for s in cfg.layers]


@settings(max_examples=300)
@given(st.text(max_size=200))
def test_parse_is_total(text):
    """Any input either parses or raises a line-numbered NetFileError."""
    try:
        cfg = parse_netfile(text)
        assert isinstance(cfg, NetConfig)
    except NetFileError as e:
        assert isinstance(e.line, int) and e.line >= 1


def test_validate_shapes_lenet():
    cfg = parse_netfile((GOLDEN_DIR / "lenet.netfile").read_text())
    shapes = validate_shapes(cfg, Shape4(1, 1, 28, 28), LENET_WEIGHT_SHAPES)
    assert shapes[-1] == Shape4(1, 10, 1, 1)
    assert [s.dims() for s in shapes] == [
        (1, 20, 24, 24), (1, 20, 12, 12), (1, 50, 8, 8),
        (1, 50, 4, 4), (1, 500, 1, 1), (1, 10, 1, 1),
    ]


def test_validate_shapes_channel_mismatch_names_layer():
    cfg = parse_netfile((GOLDEN_DIR / "lenet.netfile").read_text())
    bad = dict(LENET_WEIGHT_SHAPES, conv2=(50, 19, 5, 5))
    with pytest.raises(ShapeError, match="conv2"):
        validate_shapes(cfg, Shape4(1, 1, 28, 28), bad)


def test_validate_shapes_identity_net():
    cfg = parse_netfile("layer {\n kind: relu\n name: act\n}\n")
    assert validate_shapes(cfg, Shape4(2, 3, 5, 7), {}) == [Shape4(2, 3, 5, 7)]
