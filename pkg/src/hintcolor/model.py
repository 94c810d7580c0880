"""The colorization network: patch tokens through a Transformer encoder,
then a receptive-field-3 stabilizing layer and pixel shuffling back to
full resolution.

The encoder is a standard pre-norm ViT stack with a learned additive
relative positional bias per head in every attention layer. The network
maps a 4-channel input (normalized L, normalized hint ab, hint mask) to
the 2 normalized chroma planes; the given L plane is reattached outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .colorspace import LabImage, RgbImage, denormalize_ab, lab_to_rgb, normalize_l
from .hints import Hint, build_model_input, encode_hints

LS_KINDS = ("convolution", "local_attention", "linear")


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 224
    patch_size: int = 16
    depth: int = 12
    dim: int = 768
    heads: int = 12
    mlp_dim: int = 3072
    ls_kind: str = "convolution"

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.ls_kind not in LS_KINDS:
            raise ValueError(f"ls_kind must be one of {LS_KINDS}, got {self.ls_kind!r}")

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def tokens(self) -> int:
        return self.grid_size**2

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def shuffle_channels(self) -> int:
        # 2 chroma channels per pixel of each P x P patch.
        return 2 * self.patch_size**2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @classmethod
    def base(cls, **overrides) -> "ModelConfig":
        return replace(cls(), **overrides)

    @classmethod
    def small(cls, **overrides) -> "ModelConfig":
        return replace(cls(dim=384, heads=6, mlp_dim=1536), **overrides)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        return replace(cls(dim=192, heads=3, mlp_dim=768), **overrides)

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        cfg = cls(image_size=64, patch_size=8, depth=4, dim=64, heads=4, mlp_dim=256)
        return replace(cfg, **overrides)

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelConfig":
        factories = {"base": cls.base, "small": cls.small, "tiny": cls.tiny, "toy": cls.toy}
        if name not in factories:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(factories)}")
        return factories[name](**overrides)


class ModelParams:
    """Ordered mapping of unique parameter names to tracked tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def count(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def astype(self, dtype) -> "ModelParams":
        out = ModelParams()
        for name, t in self._params.items():
            out.add(name, t.data.astype(dtype))
        return out


def _trunc_normal(rng: np.random.Generator, shape, std=0.02):
    """Normal(0, std) resampled until within 2 std, the usual ViT init."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


def expected_param_shapes(config: ModelConfig) -> dict[str, tuple]:
    """Name -> shape for every parameter the architecture requires."""
    d, heads, P = config.dim, config.heads, config.patch_size
    G = config.grid_size
    table_size = (2 * G - 1) ** 2
    shapes: dict[str, tuple] = {
        "patch_embed.weight": (P * P * 4, d),
        "patch_embed.bias": (d,),
    }
    for i in range(config.depth):
        b = f"blocks.{i}"
        shapes[f"{b}.ln1.gamma"] = (d,)
        shapes[f"{b}.ln1.beta"] = (d,)
        for proj in ("q", "k", "v", "out"):
            shapes[f"{b}.attn.{proj}.weight"] = (d, d)
            shapes[f"{b}.attn.{proj}.bias"] = (d,)
        shapes[f"{b}.attn.rel_bias"] = (heads, table_size)
        shapes[f"{b}.ln2.gamma"] = (d,)
        shapes[f"{b}.ln2.beta"] = (d,)
        shapes[f"{b}.mlp.fc1.weight"] = (d, config.mlp_dim)
        shapes[f"{b}.mlp.fc1.bias"] = (config.mlp_dim,)
        shapes[f"{b}.mlp.fc2.weight"] = (config.mlp_dim, d)
        shapes[f"{b}.mlp.fc2.bias"] = (d,)
    shapes["final_ln.gamma"] = (d,)
    shapes["final_ln.beta"] = (d,)
    C = config.shuffle_channels
    if config.ls_kind == "convolution":
        shapes["ls.kernel"] = (3, 3, d, C)
        shapes["ls.bias"] = (C,)
    elif config.ls_kind == "linear":
        shapes["ls.weight"] = (d, C)
        shapes["ls.bias"] = (C,)
    else:  # local_attention
        shapes["ls.q.weight"] = (d, d)
        shapes["ls.q.bias"] = (d,)
        shapes["ls.k.weight"] = (d, d)
        shapes["ls.k.bias"] = (d,)
        shapes["ls.v.weight"] = (d, C)
        shapes["ls.v.bias"] = (C,)
    return shapes


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Truncated-normal weights (std 0.02), unit LN scales, zero biases and
    zero relative-bias tables. The 3x3 LS kernel gets std 0.02/3 so its
    output variance at init matches the linear LS head's."""
    rng = np.random.default_rng(seed)
    params = ModelParams()
    for name, shape in expected_param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("bias", "beta", "rel_bias"):
            value = np.zeros(shape)
        elif leaf == "gamma":
            value = np.ones(shape)
        elif leaf == "kernel":
            # fan-in is 9x the channel count; shrink std to compensate
            value = _trunc_normal(rng, shape, std=0.02 / 3.0)
        else:
            value = _trunc_normal(rng, shape)
        params.add(name, np.ascontiguousarray(value, dtype=dtype))
    return params


def patchify(x: np.ndarray, patch_size: int) -> np.ndarray:
    """(..., H, W, C) -> (..., N, P*P*C) tokens in row-major patch-grid order."""
    *lead, H, W, C = x.shape
    P = patch_size
    if H % P != 0 or W % P != 0:
        raise ValueError(f"spatial dims ({H}, {W}) not divisible by patch size {P}")
    gh, gw = H // P, W // P
    r = x.reshape(*lead, gh, P, gw, P, C)
    n = len(lead)
    perm = tuple(range(n)) + (n, n + 2, n + 1, n + 3, n + 4)
    return np.ascontiguousarray(r.transpose(perm)).reshape(*lead, gh * gw, P * P * C)


def positional_encoding(n_tokens: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Fixed sinusoid over the flattened token index.

    PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same).
    """
    if dim % 2 != 0:
        raise ValueError(f"dim must be even, got {dim}")
    pos = np.arange(n_tokens, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    pe = np.empty((n_tokens, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)


def relative_index_map(grid: int) -> np.ndarray:
    """(N, N) table indices: entry (i, j) encodes the 2-D offset of token j
    from token i as (dy + G - 1) * (2G - 1) + (dx + G - 1)."""
    coords = np.stack(np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij"), axis=-1)
    flat = coords.reshape(-1, 2)  # (N, 2) as (y, x)
    dy = flat[None, :, 0] - flat[:, None, 0]
    dx = flat[None, :, 1] - flat[:, None, 1]
    return (dy + grid - 1) * (2 * grid - 1) + (dx + grid - 1)


def relative_bias(table: Tensor, grid: int) -> Tensor:
    """Expand the per-head offset table into the (heads, N, N) bias matrix."""
    return ad.index_lastdim(table, relative_index_map(grid))


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, w), b)


def attention(z: Tensor, params: ModelParams, prefix: str, config: ModelConfig,
              record: list | None = None) -> Tensor:
    """Multi-head self-attention with relative positional bias.

    z: (B, N, d). Appends the post-softmax weights of the first batch item
    to `record` when capturing.
    """
    B = z.shape[0]
    N, d, heads, dh = config.tokens, config.dim, config.heads, config.head_dim
    q = _linear(z, params[f"{prefix}.q.weight"], params[f"{prefix}.q.bias"])
    k = _linear(z, params[f"{prefix}.k.weight"], params[f"{prefix}.k.bias"])
    v = _linear(z, params[f"{prefix}.v.weight"], params[f"{prefix}.v.bias"])

    def split_heads(t):
        return ad.transpose(ad.reshape(t, (B, N, heads, dh)), (0, 2, 1, 3))

    q, k, v = split_heads(q), split_heads(k), split_heads(v)
    logits = ad.mul_scalar(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    bias = relative_bias(params[f"{prefix}.rel_bias"], config.grid_size)
    logits = ad.add(logits, bias)
    attn = ad.softmax_lastdim(logits)
    if record is not None:
        record.append(np.array(attn.data[0], dtype=np.float64))
    mixed = ad.matmul(attn, v)
    merged = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (B, N, d))
    return _linear(merged, params[f"{prefix}.out.weight"], params[f"{prefix}.out.bias"])


def encoder_block(z: Tensor, params: ModelParams, index: int, config: ModelConfig,
                  record: list | None = None) -> Tensor:
    """Pre-norm residual block: attention then MLP."""
    b = f"blocks.{index}"
    normed = ad.layer_norm(z, params[f"{b}.ln1.gamma"], params[f"{b}.ln1.beta"])
    z = ad.add(z, attention(normed, params, f"{b}.attn", config, record))
    normed = ad.layer_norm(z, params[f"{b}.ln2.gamma"], params[f"{b}.ln2.beta"])
    h = ad.gelu(_linear(normed, params[f"{b}.mlp.fc1.weight"], params[f"{b}.mlp.fc1.bias"]))
    h = _linear(h, params[f"{b}.mlp.fc2.weight"], params[f"{b}.mlp.fc2.bias"])
    return ad.add(z, h)


def _local_attention_mask(grid: int) -> np.ndarray:
    """Additive mask (G, G, 9): 0 for valid neighbors, -1e9 at borders."""
    mask = np.zeros((grid, grid, 9))
    for dy in range(3):
        for dx in range(3):
            k = 3 * dy + dx
            if dy == 0:
                mask[0, :, k] = -1e9
            if dy == 2:
                mask[-1, :, k] = -1e9
            if dx == 0:
                mask[:, 0, k] = -1e9
            if dx == 2:
                mask[:, -1, k] = -1e9
    return mask


def local_stabilizing_layer(y: Tensor, config: ModelConfig, params: ModelParams) -> Tensor:
    """Map the (B, G, G, d) feature grid to (B, G, G, 2P^2) shuffle channels.

    convolution: one 3x3 conv. local_attention: each cell attends over its
    3x3 neighborhood (border neighbors masked out). linear: an independent
    per-cell projection, i.e. no neighborhood at all.
    """
    kind = config.ls_kind
    if kind == "convolution":
        return ad.conv2d_same(y, params["ls.kernel"], params["ls.bias"])
    if kind == "linear":
        return _linear(y, params["ls.weight"], params["ls.bias"])
    if kind == "local_attention":
        B, G, _, d = y.shape
        C = config.shuffle_channels
        q = _linear(y, params["ls.q.weight"], params["ls.q.bias"])
        neigh = ad.unfold3x3(y)  # (B, G, G, 9, d)
        k = _linear(neigh, params["ls.k.weight"], params["ls.k.bias"])
        v = _linear(neigh, params["ls.v.weight"], params["ls.v.bias"])
        q = ad.reshape(q, (B, G, G, 1, d))
        logits = ad.matmul(q, ad.transpose(k, (0, 1, 2, 4, 3)))  # (B, G, G, 1, 9)
        logits = ad.mul_scalar(logits, 1.0 / math.sqrt(d))
        mask = _local_attention_mask(G).astype(y.dtype).reshape(G, G, 1, 9)
        attn = ad.softmax_lastdim(ad.add(logits, mask))
        out = ad.matmul(attn, v)  # (B, G, G, 1, C)
        return ad.reshape(out, (B, G, G, C))
    raise ValueError(f"unknown ls_kind {kind!r}")


def forward(x: np.ndarray, params: ModelParams, config: ModelConfig,
            record_attention: bool = False):
    """Run the network on a (B, H, W, 4) or (H, W, 4) input.

    Returns normalized ab planes of shape (B, H, W, 2) (batch squeezed when
    the input was unbatched), plus the per-layer attention record when
    requested.
    """
    x = np.asarray(x)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    B, H, W, C = x.shape
    if (H, W, C) != (config.image_size, config.image_size, 4):
        raise ValueError(
            f"input shape {(H, W, C)} does not match config "
            f"({config.image_size}, {config.image_size}, 4)"
        )
    dtype = params["patch_embed.weight"].dtype
    tokens = patchify(x.astype(dtype, copy=False), config.patch_size)

    record: list | None = [] if record_attention else None
    z = _linear(Tensor(tokens), params["patch_embed.weight"], params["patch_embed.bias"])
    pe = positional_encoding(config.tokens, config.dim, dtype=dtype)
    z = ad.add(z, Tensor(pe))
    for i in range(config.depth):
        z = encoder_block(z, params, i, config, record)
    z = ad.layer_norm(z, params["final_ln.gamma"], params["final_ln.beta"])
    G = config.grid_size
    grid = ad.reshape(z, (B, G, G, config.dim))
    stabilized = local_stabilizing_layer(grid, config, params)
    ab = ad.pixel_shuffle(stabilized, config.patch_size)
    if squeeze:
        ab = ad.reshape(ab, ab.shape[1:])
    if record_attention:
        return ab, record
    return ab


def predict_ab(L: np.ndarray, hints: list[Hint], params: ModelParams,
               config: ModelConfig) -> np.ndarray:
    """Normalized-input pipeline: L plane plus hints -> denormalized ab planes."""
    L = np.asarray(L, dtype=np.float64)
    if L.shape != (config.image_size, config.image_size):
        raise ValueError(
            f"L plane shape {L.shape} does not match config size {config.image_size}"
        )
    planes = encode_hints(hints, config.image_size, config.image_size)
    x = build_model_input(L, planes)
    ab = forward(x, params, config).data
    return denormalize_ab(np.asarray(ab, dtype=np.float64))


def predict_image(L: np.ndarray, hints: list[Hint], params: ModelParams,
                  config: ModelConfig) -> RgbImage:
    """Colorize a grayscale plane: predicted ab fused with the given L."""
    ab = predict_ab(L, hints, params, config)
    lab = LabImage(
        width=config.image_size,
        height=config.image_size,
        L=np.asarray(L, dtype=np.float64),
        a=ab[..., 0],
        b=ab[..., 1],
    )
    return lab_to_rgb(lab)


def predict_lab(L: np.ndarray, hints: list[Hint], params: ModelParams,
                config: ModelConfig) -> LabImage:
    """Like predict_image but stays in Lab; used by the Lab-space metrics."""
    ab = predict_ab(L, hints, params, config)
    return LabImage(
        width=config.image_size,
        height=config.image_size,
        L=np.asarray(L, dtype=np.float64),
        a=ab[..., 0],
        b=ab[..., 1],
    )


def count_flops(config: ModelConfig) -> float:
    """Forward-pass cost in giga multiply-accumulates, the convention the
    model-size comparisons use. Counts projections, attention products, MLP
    and the stabilizing layer, bias adds included; elementwise softmax, LN
    and activation costs are excluded."""
    N, d, P = config.tokens, config.dim, config.patch_size
    G, C = config.grid_size, config.shuffle_channels
    total = N * (P * P * 4) * d + N * d  # patch projection
    per_layer = (
        3 * (N * d * d + N * d)  # q, k, v
        + N * N * d  # QK^T over all heads
        + N * N * d  # attn @ V
        + N * d * d + N * d  # out projection
        + N * d * config.mlp_dim + N * config.mlp_dim  # fc1
        + N * config.mlp_dim * d + N * d  # fc2
    )
    total += config.depth * per_layer
    if config.ls_kind == "convolution":
        total += G * G * 9 * d * C + G * G * C
    elif config.ls_kind == "linear":
        total += G * G * d * C + G * G * C
    else:  # local_attention
        total += (
            G * G * (d * d + d)  # q
            + 9 * G * G * (d * d + d)  # k over neighbors
            + 9 * G * G * (d * C + C)  # v over neighbors
            + G * G * 9 * d  # q . k
            + G * G * 9 * C  # attn-weighted sum
        )
    return total / 1e9


def backbone_parameter_count(config: ModelConfig) -> int:
    """Parameters in the encoder blocks and final LN (the ViT backbone)."""
    shapes = expected_param_shapes(config)
    return sum(
        int(np.prod(shape))
        for name, shape in shapes.items()
        if name.startswith("blocks.") or name.startswith("final_ln.")
    )


class Colorizer:
    """Bundles a parameter set with its config for the inference-side API."""

    def __init__(self, params: ModelParams, config: ModelConfig):
        self.params = params
        self.config = config

    def predict_image(self, L, hints) -> RgbImage:
        return predict_image(L, hints, self.params, self.config)

    def predict_lab(self, L, hints) -> LabImage:
        return predict_lab(L, hints, self.params, self.config)

    def forward(self, x, record_attention=False):
        return forward(x, self.params, self.config, record_attention)

    def gflops(self) -> float:
        return count_flops(self.config)

    def parameter_count(self) -> int:
        return self.params.count()
