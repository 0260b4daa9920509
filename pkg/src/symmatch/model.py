"""PointNet-style per-point encoder: n×3 coordinates -> n×k embedding.

A shared per-point MLP (3->64->64->128->1024) is max-pooled into a global
feature. The 128-wide local feature of each point is concatenated with the
global feature and passed through a head (1152->512->256->k). No T-Nets and
no batch norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .geom import PointCloud

CHECKPOINT_VERSION = 1
_HEADER = "SYMMATCH-CHECKPOINT"


@dataclass(frozen=True)
class ArchConfig:
    k: int = 20
    point_widths: tuple[int, ...] = (64, 64, 128, 1024)
    head_widths: tuple[int, ...] = (512, 256)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.point_widths) < 2:
            raise ValueError("need at least two per-point layers (local + global)")
        if any(w < 1 for w in (*self.point_widths, *self.head_widths)):
            raise ValueError("layer widths must be >= 1")

    @property
    def local_width(self) -> int:
        return self.point_widths[-2]

    @property
    def global_width(self) -> int:
        return self.point_widths[-1]

    def layer_shapes(self) -> dict[str, tuple[int, int]]:
        shapes: dict[str, tuple[int, int]] = {}
        prev = 3
        for i, w in enumerate(self.point_widths):
            shapes[f"point{i}.W"] = (prev, w)
            shapes[f"point{i}.b"] = (1, w)
            prev = w
        widths = (*self.head_widths, self.k)
        # first head layer acts on [local | global]; its weight is stored as two blocks
        shapes["head0.W_local"] = (self.local_width, widths[0])
        shapes["head0.W_global"] = (self.global_width, widths[0])
        shapes["head0.b"] = (1, widths[0])
        for i in range(1, len(widths)):
            shapes[f"head{i}.W"] = (widths[i - 1], widths[i])
            shapes[f"head{i}.b"] = (1, widths[i])
        return shapes

    def describe(self) -> str:
        return (
            f"k={self.k}\n"
            f"point_widths={','.join(map(str, self.point_widths))}\n"
            f"head_widths={','.join(map(str, self.head_widths))}\n"
        )


@dataclass
class EncoderParams:
    arch: ArchConfig
    tensors: dict[str, ad.Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ad.Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.arch, {k: ad.Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in self.tensors.items()}
        )

    def to_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(v.data).tobytes() for v in self.tensors.values())


def fan_in(arch: ArchConfig, name: str) -> int:
    shapes = arch.layer_shapes()
    if name.startswith("head0.W"):
        return arch.local_width + arch.global_width
    return shapes[name][0]


def init(arch: ArchConfig, seed: int = 0) -> EncoderParams:
    """He-normal weights (std sqrt(2 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in arch.layer_shapes().items():
        if name.endswith(".b"):
            data = np.zeros(shape)
        else:
            data = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in(arch, name))
        tensors[name] = ad.Tensor(data, requires_grad=True, name=name)
    return EncoderParams(arch, tensors)


def embed(params: EncoderParams, cloud) -> ad.Tensor:
    """Per-point embedding of ``cloud`` (a PointCloud or an n×3 array)."""
    pos = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    arch = params.arch
    n = len(pos)
    h = ad.Tensor(pos)
    local = None
    last = len(arch.point_widths) - 1
    for i in range(len(arch.point_widths)):
        name = f"point{i}"
        h = ad.matmul(h, params[f"{name}.W"], name=name)
        h = ad.relu(ad.add(h, params[f"{name}.b"], name=name), name=name)
        if i == last - 1:
            local = h
    pooled = ad.global_max_pool(h)
    # [local | global] @ W  ==  local @ W_local + global @ W_global
    g = ad.repeat_rows(ad.matmul(pooled, params["head0.W_global"], name="head0"), n)
    h = ad.add(ad.matmul(local, params["head0.W_local"], name="head0"), g)
    h = ad.add(h, params["head0.b"], name="head0")
    depth = len(arch.head_widths) + 1
    if depth > 1:
        h = ad.relu(h, name="head0")
    for i in range(1, depth):
        h = ad.matmul(h, params[f"head{i}.W"], name=f"head{i}")
        h = ad.add(h, params[f"head{i}.b"], name=f"head{i}")
        if i < depth - 1:
            h = ad.relu(h, name=f"head{i}")
    return h


def save_checkpoint(path, params: EncoderParams, extra: dict[str, np.ndarray] | None = None, meta=None) -> None:
    """Text header (version, architecture, blob names) then binary tensor blobs."""
    extra = extra or {}
    meta = meta or {}
    names = list(params.tensors)
    extra_names = list(extra)
    with open(path, "wb") as f:
        header = f"{_HEADER}\nversion={CHECKPOINT_VERSION}\n" + params.arch.describe()
        for key, value in meta.items():
            header += f"meta.{key}={value}\n"
        header += f"tensors={','.join(names)}\nextra={','.join(extra_names)}\nend_header\n"
        f.write(header.encode("utf-8"))
        for name in names:
            ad.write_tensor(f, params[name].data)
        for name in extra_names:
            ad.write_tensor(f, extra[name])


def load_checkpoint(path):
    """Returns ``(params, extra, meta)``."""
    fields: dict[str, str] = {}
    with open(path, "rb") as f:
        first = f.readline().decode("utf-8", errors="replace").strip()
        if first != _HEADER:
            raise ValueError(f"{path}: not a checkpoint file")
        while True:
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            line = line.decode("utf-8").strip()
            if line == "end_header":
                break
            key, _, value = line.partition("=")
            fields[key] = value
        if "version" not in fields:
            raise ValueError(f"{path}: missing version tag")
        if int(fields["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {fields['version']}")
        arch = ArchConfig(
            k=int(fields["k"]),
            point_widths=tuple(int(x) for x in fields["point_widths"].split(",")),
            head_widths=tuple(int(x) for x in fields["head_widths"].split(",") if x),
        )
        expected = arch.layer_shapes()
        tensors = {}
        for name in filter(None, fields["tensors"].split(",")):
            data = ad.read_tensor(f)
            if name not in expected or data.shape != expected[name]:
                raise ValueError(f"{path}: tensor {name} has unexpected shape {data.shape}")
            tensors[name] = ad.Tensor(data, requires_grad=True, name=name)
        if set(tensors) != set(expected):
            raise ValueError(f"{path}: missing tensors {sorted(set(expected) - set(tensors))}")
        extra = {name: ad.read_tensor(f) for name in filter(None, fields.get("extra", "").split(","))}
    meta = {k[5:]: v for k, v in fields.items() if k.startswith("meta.")}
    return EncoderParams(arch, tensors), extra, meta
