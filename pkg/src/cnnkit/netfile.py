"""NetFile parsing, pretty-printing and whole-network shape validation.

The NetFile is a line-oriented text format: three optional top-level
runtime parameters (`allocated_ram`, `execution_mode`, `auto_tuning`) as
`key: value` lines, plus one `layer { ... }` block per layer.  `#` starts
a comment, blank lines and indentation are insignificant, keys are
lowercase.  The exact grammar is documented in docs/netfile.md and the
golden files under golden/.

Every malformed input raises NetFileError carrying the offending line
number; parsing never crashes with anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tensor import Shape4, ShapeError, conv_output_shape, pool_output_shape

LAYER_KINDS = ("conv", "pool", "fc", "relu", "lrn", "softmax")
EXECUTION_MODES = ("sequential", "parallel")
AUTO_TUNING_VALUES = ("on", "off")


class NetFileError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


@dataclass
class LayerSpec:
    kind: str
    name: str
    params_file: str | None = None
    pad: int = 0
    stride: int = 1
    group: int = 1
    kernel_h: int | None = None
    kernel_w: int | None = None
    pool_mode: str | None = None
    lrn_n: int | None = None
    lrn_alpha: float | None = None
    lrn_beta: float | None = None
    lrn_k: float | None = None
    fused_relu: bool = False


@dataclass
class NetConfig:
    layers: list[LayerSpec] = field(default_factory=list)
    allocated_ram: int = 0
    execution_mode: str = "parallel"
    auto_tuning: str = "off"


def _parse_int(raw: str, line: int, key: str, minimum: int) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise NetFileError(line, f"{key}: expected an integer, got {raw!r}") from None
    if v < minimum:
        raise NetFileError(line, f"{key}: must be >= {minimum}, got {v}")
    return v


def _parse_float(raw: str, line: int, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise NetFileError(line, f"{key}: expected a number, got {raw!r}") from None


def _parse_bool(raw: str, line: int, key: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise NetFileError(line, f"{key}: expected true or false, got {raw!r}")


# key -> (parser, kinds the key applies to); None means any kind
_LAYER_KEYS = {
    "kind": (None, None),
    "name": (None, None),
    "params_file": (None, ("conv", "fc")),
    "pad": (lambda r, l: _parse_int(r, l, "pad", 0), ("conv",)),
    "stride": (lambda r, l: _parse_int(r, l, "stride", 1), ("conv", "pool")),
    "group": (lambda r, l: _parse_int(r, l, "group", 1), ("conv",)),
    "kernel_h": (lambda r, l: _parse_int(r, l, "kernel_h", 1), ("pool",)),
    "kernel_w": (lambda r, l: _parse_int(r, l, "kernel_w", 1), ("pool",)),
    "pool_mode": (None, ("pool",)),
    "lrn_n": (lambda r, l: _parse_int(r, l, "lrn_n", 1), ("lrn",)),
    "lrn_alpha": (lambda r, l: _parse_float(r, l, "lrn_alpha"), ("lrn",)),
    "lrn_beta": (lambda r, l: _parse_float(r, l, "lrn_beta"), ("lrn",)),
    "lrn_k": (lambda r, l: _parse_float(r, l, "lrn_k"), ("lrn",)),
    "fused_relu": (lambda r, l: _parse_bool(r, l, "fused_relu"), ("conv", "fc")),
}

_REQUIRED_KEYS = {
    "conv": ("params_file",),
    "fc": ("params_file",),
    "pool": ("kernel_h", "kernel_w", "pool_mode"),
    "lrn": ("lrn_n", "lrn_alpha", "lrn_beta", "lrn_k"),
    "relu": (),
    "softmax": (),
}


def _build_layer(raw: dict[str, tuple[str, int]], open_line: int) -> LayerSpec:
    if "kind" not in raw:
        raise NetFileError(open_line, "layer block is missing 'kind'")
    kind, kind_line = raw["kind"]
    if kind not in LAYER_KINDS:
        raise NetFileError(kind_line, f"unknown layer kind {kind!r}")
    if "name" not in raw:
        raise NetFileError(open_line, f"{kind} layer block is missing 'name'")

    fields: dict = {"kind": kind, "name": raw["name"][0]}
    for key, (value, line) in raw.items():
        if key in ("kind", "name"):
            continue
        parser, kinds = _LAYER_KEYS[key]
        if kinds is not None and kind not in kinds:
            raise NetFileError(line, f"key {key!r} is not valid for a {kind} layer")
        fields[key] = parser(value, line) if parser else value

    if kind == "pool":
        mode, mode_line = raw["pool_mode"]
        if mode not in ("max", "mean"):
            raise NetFileError(mode_line, f"pool_mode: expected max or mean, got {mode!r}")
    if kind == "lrn":
        n, n_line = fields["lrn_n"], raw["lrn_n"][1]
        if n % 2 == 0:
            raise NetFileError(n_line, f"lrn_n must be odd, got {n}")

    missing = [k for k in _REQUIRED_KEYS[kind] if k not in raw]
    if missing:
        raise NetFileError(open_line, f"{kind} layer {fields['name']!r} is missing {missing[0]!r}")
    return LayerSpec(**fields)


def parse_netfile(text: str) -> NetConfig:
    cfg = NetConfig()
    seen_top: set[str] = set()
    names: dict[str, int] = {}
    block: dict[str, tuple[str, int]] | None = None
    block_line = 0
    last_line = 0

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue

        if line == "layer {":
            if block is not None:
                raise NetFileError(lineno, "layer block opened inside another layer block")
            block, block_line = {}, lineno
            continue
        if line == "}":
            if block is None:
                raise NetFileError(lineno, "'}' without an open layer block")
            spec = _build_layer(block, block_line)
            if spec.name in names:
                raise NetFileError(
                    lineno, f"duplicate layer name {spec.name!r} (first used on line {names[spec.name]})"
                )
            names[spec.name] = block_line
            cfg.layers.append(spec)
            block = None
            continue

        if ":" not in line:
            raise NetFileError(lineno, f"expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not value:
            raise NetFileError(lineno, f"missing value for key {key!r}")

        if block is not None:
            if key not in _LAYER_KEYS:
                raise NetFileError(lineno, f"unknown layer key {key!r}")
            if key in block:
                raise NetFileError(lineno, f"duplicate key {key!r} in layer block")
            block[key] = (value, lineno)
            continue

        if key in seen_top:
            raise NetFileError(lineno, f"duplicate top-level key {key!r}")
        seen_top.add(key)
        if key == "allocated_ram":
            cfg.allocated_ram = _parse_int(value, lineno, key, 0)
        elif key == "execution_mode":
            if value not in EXECUTION_MODES:
                raise NetFileError(lineno, f"execution_mode: expected sequential or parallel, got {value!r}")
            cfg.execution_mode = value
        elif key == "auto_tuning":
            if value not in AUTO_TUNING_VALUES:
                raise NetFileError(lineno, f"auto_tuning: expected on or off, got {value!r}")
            cfg.auto_tuning = value
        else:
            raise NetFileError(lineno, f"unknown top-level key {key!r}")

    if block is not None:
        raise NetFileError(last_line, "unterminated layer block (missing '}')")
    if not cfg.layers:
        raise NetFileError(max(last_line, 1), "no layers defined")
    return cfg


def format_netfile(cfg: NetConfig) -> str:
    """Pretty-print a NetConfig; parse_netfile(format_netfile(cfg)) == cfg."""
    lines = [
        f"allocated_ram: {cfg.allocated_ram}",
        f"execution_mode: {cfg.execution_mode}",
        f"auto_tuning: {cfg.auto_tuning}",
        "",
    ]
    for spec in cfg.layers:
        lines.append("layer {")
        lines.append(f"  kind: {spec.kind}")
        lines.append(f"  name: {spec.name}")
        if spec.kind in ("conv", "fc"):
            lines.append(f"  params_file: {spec.params_file}")
            lines.append(f"  fused_relu: {'true' if spec.fused_relu else 'false'}")
        if spec.kind == "conv":
            lines.append(f"  pad: {spec.pad}")
            lines.append(f"  stride: {spec.stride}")
            lines.append(f"  group: {spec.group}")
        if spec.kind == "pool":
            lines.append(f"  kernel_h: {spec.kernel_h}")
            lines.append(f"  kernel_w: {spec.kernel_w}")
            lines.append(f"  stride: {spec.stride}")
            lines.append(f"  pool_mode: {spec.pool_mode}")
        if spec.kind == "lrn":
            lines.append(f"  lrn_n: {spec.lrn_n}")
            lines.append(f"  lrn_alpha: {spec.lrn_alpha!r}")
            lines.append(f"  lrn_beta: {spec.lrn_beta!r}")
            lines.append(f"  lrn_k: {spec.lrn_k!r}")
        lines.append("}")
        lines.append("")
    return "\n".join(lines)


def validate_shapes(
    cfg: NetConfig, input_shape: Shape4, weight_shapes: dict[str, tuple[int, int, int, int]]
) -> list[Shape4]:
    """Propagate the input shape through every layer.

    weight_shapes maps conv/fc layer names to their 4-D weight shape
    ((kernels, in_channels/group, kh, kw) for conv, (out, in, 1, 1) for fc).
    Returns one output Shape4 per layer; any mismatch raises ShapeError
    naming the layer.
    """
    shapes: list[Shape4] = []
    cur = input_shape
    for spec in cfg.layers:
        try:
            cur = _layer_output_shape(spec, cur, weight_shapes)
        except ShapeError as e:
            raise ShapeError(f"layer {spec.name!r}: {e}") from None
        shapes.append(cur)
    return shapes


def _layer_output_shape(spec, cur, weight_shapes):
    if spec.kind in ("conv", "fc"):
        if spec.name not in weight_shapes:
            raise ShapeError("no weight shape available")
        wshape = weight_shapes[spec.name]
    if spec.kind == "conv":
        k, cpg, kh, kw = wshape
        if cur.c % spec.group != 0 or k % spec.group != 0:
            raise ShapeError(
                f"group {spec.group} does not divide input channels {cur.c} and kernels {k}"
            )
        if cpg != cur.c // spec.group:
            raise ShapeError(
                f"weight expects {cpg} channels per group, input has {cur.c // spec.group}"
            )
        return conv_output_shape(cur, k, kh, kw, spec.pad, spec.stride)
    if spec.kind == "pool":
        return pool_output_shape(cur, spec.kernel_h, spec.kernel_w, spec.stride)
    if spec.kind == "fc":
        out_f, in_f = wshape[0], wshape[1]
        flat = cur.c * cur.h * cur.w
        if in_f != flat:
            raise ShapeError(f"weight expects {in_f} input features, input flattens to {flat}")
        return Shape4(cur.n, out_f, 1, 1)
    return cur  # relu / lrn / softmax preserve shape
