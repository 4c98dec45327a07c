"""A small from-scratch CNN forward pass plus weight-file formats.

Supports the layer kinds needed for compact traffic-sign classifiers: 2-D
convolution (cross-correlation with zero padding), ReLU, max pooling, flatten,
and dense layers, finished by a softmax. Inference only; weights are produced
elsewhere and loaded from a little-endian binary format (magic ``LCNN``) or an
equivalent JSON mirror for hand-written test specs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import SpecLoadError
from .raster import BinaryMask, RasterImage, scale, to_grayscale

MAGIC = b"LCNN"
FORMAT_VERSION = 1

# Default label set: the frequent-sign subset such classifiers are trained on.
DEFAULT_CLASS_LABELS = (
    "Added Lane",
    "Curve Left",
    "Curve Right",
    "Dip",
    "Keep Right",
    "Lane Ends",
    "Merge",
    "Ped. Crossing",
    "School",
    "Signal Ahead",
    "Speed Limit 25",
    "Speed Limit 35",
    "Stop",
    "Stop Ahead",
    "Turn Right",
    "Yield",
)


def _freeze(arr: np.ndarray, dtype, shape, what: str) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype)
    if out.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {out.shape}")
    out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ConvLayer:
    out_channels: int
    in_channels: int
    kernel_h: int
    kernel_w: int
    stride: int
    padding: int
    weights: np.ndarray = field(repr=False)
    biases: np.ndarray = field(repr=False)
    kind = "conv"

    def __post_init__(self):
        if min(self.out_channels, self.in_channels, self.kernel_h, self.kernel_w, self.stride) < 1:
            raise ValueError("conv dimensions and stride must be >= 1")
        if self.padding < 0:
            raise ValueError("conv padding must be >= 0")
        shape = (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)
        object.__setattr__(self, "weights", _freeze(self.weights, np.float32, shape, "conv weights"))
        object.__setattr__(self, "biases", _freeze(self.biases, np.float32, (self.out_channels,), "conv biases"))


@dataclass(frozen=True)
class ReluLayer:
    kind = "relu"


@dataclass(frozen=True)
class MaxPoolLayer:
    window: int
    stride: int
    kind = "maxpool"

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError("maxpool window and stride must be >= 1")


@dataclass(frozen=True)
class FlattenLayer:
    kind = "flatten"


@dataclass(frozen=True, eq=False)
class DenseLayer:
    out_features: int
    in_features: int
    weights: np.ndarray = field(repr=False)
    biases: np.ndarray = field(repr=False)
    kind = "dense"

    def __post_init__(self):
        if self.out_features < 1 or self.in_features < 1:
            raise ValueError("dense feature counts must be >= 1")
        shape = (self.out_features, self.in_features)
        object.__setattr__(self, "weights", _freeze(self.weights, np.float32, shape, "dense weights"))
        object.__setattr__(self, "biases", _freeze(self.biases, np.float32, (self.out_features,), "dense biases"))


Layer = Union[ConvLayer, ReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer]


@dataclass(frozen=True, eq=False)
class ClassifierSpec:
    """Architecture plus weights; validated against the declared input shape."""

    input_size: int
    input_channels: int
    class_labels: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(str(c) for c in self.class_labels))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_size < 1 or self.input_channels < 1:
            raise SpecLoadError("input size and channel count must be >= 1")
        if len(self.class_labels) < 2:
            raise SpecLoadError("need at least two class labels")
        self._validate_chain()

    @property
    def num_classes(self) -> int:
        return len(self.class_labels)

    def _validate_chain(self):
        # Walk (channels, h, w) / flat feature count through the layers.
        shape = ("map", self.input_channels, self.input_size, self.input_size)
        for i, layer in enumerate(self.layers):
            shape = _apply_shape(shape, layer, i)
        if shape[0] != "vec":
            raise SpecLoadError("network must end with a flat feature vector (flatten/dense)")
        if shape[1] != self.num_classes:
            raise SpecLoadError(
                f"final layer emits {shape[1]} scores but there are {self.num_classes} class labels"
            )


def _apply_shape(shape, layer: Layer, index: int):
    def fail(msg: str):
        raise SpecLoadError(f"layer {index}: {msg}")

    if isinstance(layer, ConvLayer):
        if shape[0] != "map":
            fail("conv applied to a flat vector")
        _, c, h, w = shape
        if c != layer.in_channels:
            fail(f"conv expects {layer.in_channels} input channels, got {c}")
        oh = (h + 2 * layer.padding - layer.kernel_h) // layer.stride + 1
        ow = (w + 2 * layer.padding - layer.kernel_w) // layer.stride + 1
        if oh < 1 or ow < 1:
            fail(f"conv kernel {layer.kernel_h}x{layer.kernel_w} exceeds {w}x{h} input")
        return ("map", layer.out_channels, oh, ow)
    if isinstance(layer, ReluLayer):
        return shape
    if isinstance(layer, MaxPoolLayer):
        if shape[0] != "map":
            fail("maxpool applied to a flat vector")
        _, c, h, w = shape
        oh = (h - layer.window) // layer.stride + 1
        ow = (w - layer.window) // layer.stride + 1
        if oh < 1 or ow < 1:
            fail(f"maxpool window {layer.window} exceeds {w}x{h} input")
        return ("map", c, oh, ow)
    if isinstance(layer, FlattenLayer):
        if shape[0] != "map":
            fail("flatten applied to a flat vector")
        _, c, h, w = shape
        return ("vec", c * h * w)
    if isinstance(layer, DenseLayer):
        if shape[0] != "vec":
            fail("dense applied before flatten")
        if shape[1] != layer.in_features:
            fail(f"dense expects {layer.in_features} inputs, got {shape[1]}")
        return ("vec", layer.out_features)
    fail(f"unknown layer type {type(layer).__name__}")


@dataclass(frozen=True)
class Probabilities:
    """Softmax output: class probabilities plus the decoded prediction."""

    probs: tuple
    predicted: int
    confidence_percent: float

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be non-negative")
        expected = int(np.argmax(self.probs))
        if self.predicted != expected:
            raise ValueError(f"predicted must be the first maximal index {expected}, got {self.predicted}")

    @classmethod
    def from_vector(cls, vec) -> "Probabilities":
        vec = tuple(float(p) for p in vec)
        predicted = int(np.argmax(vec))
        return cls(probs=vec, predicted=predicted, confidence_percent=100.0 * vec[predicted])


def _conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    pad = layer.padding
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (layer.kernel_h, layer.kernel_w), axis=(1, 2))
    windows = windows[:, :: layer.stride, :: layer.stride]
    out = np.einsum("chwij,ocij->ohw", windows, layer.weights, dtype=np.float32)
    return out + layer.biases[:, None, None]


def _maxpool(x: np.ndarray, layer: MaxPoolLayer) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(x, (layer.window, layer.window), axis=(1, 2))
    return windows[:, :: layer.stride, :: layer.stride].max(axis=(3, 4))


def forward(spec: ClassifierSpec, img: RasterImage) -> Probabilities:
    """Run the network on an image (auto-resized to the declared input size)."""
    if img.channels != spec.input_channels:
        raise ValueError(f"classifier expects {spec.input_channels} channels, image has {img.channels}")
    resized = scale(img, spec.input_size, spec.input_size, mode="bilinear")
    data = resized.data.astype(np.float32) / np.float32(255.0)
    if spec.input_channels == 1:
        x = data[None, :, :]
    else:
        x = np.transpose(data, (2, 0, 1))
    x = np.ascontiguousarray(x)
    for layer in spec.layers:
        if isinstance(layer, ConvLayer):
            x = _conv2d(x, layer)
        elif isinstance(layer, ReluLayer):
            x = np.maximum(x, np.float32(0.0))
        elif isinstance(layer, MaxPoolLayer):
            x = _maxpool(x, layer)
        elif isinstance(layer, FlattenLayer):
            x = x.reshape(-1)
        elif isinstance(layer, DenseLayer):
            x = layer.weights @ x + layer.biases
    scores = x.astype(np.float64)
    scores -= scores.max()
    exp = np.exp(scores)
    return Probabilities.from_vector(exp / exp.sum())


class CnnClassifier:
    """Callable wrapper binding a spec to :func:`forward`."""

    def __init__(self, spec: ClassifierSpec):
        self.spec = spec

    @property
    def class_labels(self) -> tuple:
        return self.spec.class_labels

    def __call__(self, img: RasterImage) -> Probabilities:
        return forward(self.spec, img)


class StubClassifier:
    """Deterministic stand-in classifier driven by mean masked intensity.

    The predicted class is the number of thresholds below the mean grayscale
    intensity inside ``region``; confidence ramps linearly from 50% at a
    decision threshold to 100% once the mean is ``ramp`` levels away.
    """

    def __init__(self, thresholds, region: BinaryMask, num_classes: int | None = None, ramp: float = 16.0):
        thresholds = tuple(float(t) for t in thresholds)
        if not thresholds:
            raise ValueError("need at least one threshold")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {thresholds}")
        if region.area == 0:
            raise ValueError("region mask is empty")
        if ramp <= 0:
            raise ValueError("ramp must be positive")
        min_classes = len(thresholds) + 1
        if num_classes is None:
            num_classes = min_classes
        if num_classes < min_classes:
            raise ValueError(f"num_classes must be >= {min_classes}")
        self.thresholds = thresholds
        self.region = region
        self.num_classes = int(num_classes)
        self.ramp = float(ramp)

    def __call__(self, img: RasterImage) -> Probabilities:
        gray = to_grayscale(img)
        if gray.data.shape != self.region.bits.shape:
            raise ValueError("image dimensions do not match the stub region")
        mean = float(gray.data[self.region.bits].mean())
        predicted = int(np.searchsorted(self.thresholds, mean, side="right"))
        distance = min(abs(mean - t) for t in self.thresholds)
        confidence = 0.5 + 0.5 * min(distance, self.ramp) / self.ramp
        vec = np.full(self.num_classes, (1.0 - confidence) / (self.num_classes - 1))
        vec[predicted] = confidence
        return Probabilities.from_vector(vec)


def stub_classifier(thresholds, region: BinaryMask, num_classes: int | None = None, ramp: float = 16.0) -> StubClassifier:
    """Build a :class:`StubClassifier` (see its docstring for the rule)."""
    return StubClassifier(thresholds, region, num_classes=num_classes, ramp=ramp)


# ---------------------------------------------------------------------------
# Weight files.
#
# Binary layout (all little-endian):
#   magic "LCNN" | u32 version | u32 input_size | u32 input_channels
#   | u32 n_classes | n_classes x (u32 byte_len, utf-8 label)
#   | u32 n_layers | per layer: u8 kind | u32 ndims | ndims x u32 dims
#                  | float32 weights | float32 biases
# Kind tags: 1=conv, 2=relu, 3=maxpool, 4=flatten, 5=dense.
#   conv dims: out_ch, in_ch, kh, kw, stride, padding (weights out*in*kh*kw, biases out)
#   maxpool dims: window, stride (no arrays)
#   dense dims: out_features, in_features (weights out*in row-major, biases out)
# ---------------------------------------------------------------------------

_KIND_TAGS = {"conv": 1, "relu": 2, "maxpool": 3, "flatten": 4, "dense": 5}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path
        self.context = "header"

    def fail(self, msg: str):
        raise SpecLoadError(f"{self.path}: {self.context}: {msg}")

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            self.fail(f"truncated file (needed {n} bytes at offset {self.offset})")
        chunk = self.blob[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()


def write_spec_binary(spec: ClassifierSpec, path) -> None:
    """Serialize a spec to the binary weights format."""
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts.append(struct.pack("<II", spec.input_size, spec.input_channels))
    parts.append(struct.pack("<I", spec.num_classes))
    for label in spec.class_labels:
        raw = label.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<I", len(spec.layers)))
    for layer in spec.layers:
        parts.append(struct.pack("<B", _KIND_TAGS[layer.kind]))
        if isinstance(layer, ConvLayer):
            dims = (layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w, layer.stride, layer.padding)
        elif isinstance(layer, MaxPoolLayer):
            dims = (layer.window, layer.stride)
        elif isinstance(layer, DenseLayer):
            dims = (layer.out_features, layer.in_features)
        else:
            dims = ()
        parts.append(struct.pack("<I", len(dims)))
        parts.append(struct.pack(f"<{len(dims)}I", *dims))
        if isinstance(layer, (ConvLayer, DenseLayer)):
            parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(layer.biases, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def _layer_from_reader(reader: _Reader, index: int) -> Layer:
    reader.context = f"layer {index}"
    tag = reader.u8()
    kind = _TAG_KINDS.get(tag)
    if kind is None:
        reader.fail(f"unknown layer kind tag {tag}")
    ndims = reader.u32()
    if ndims > 16:
        reader.fail(f"implausible dim count {ndims}")
    dims = [reader.u32() for _ in range(ndims)]

    def need(n: int):
        if len(dims) != n:
            reader.fail(f"{kind} expects {n} dims, got {len(dims)}")

    try:
        if kind == "conv":
            need(6)
            out_ch, in_ch, kh, kw, stride, padding = dims
            weights = reader.f32_array(out_ch * in_ch * kh * kw).reshape(out_ch, in_ch, kh, kw)
            biases = reader.f32_array(out_ch)
            return ConvLayer(out_ch, in_ch, kh, kw, stride, padding, weights, biases)
        if kind == "relu":
            need(0)
            return ReluLayer()
        if kind == "maxpool":
            need(2)
            return MaxPoolLayer(dims[0], dims[1])
        if kind == "flatten":
            need(0)
            return FlattenLayer()
        need(2)
        out_f, in_f = dims
        weights = reader.f32_array(out_f * in_f).reshape(out_f, in_f)
        biases = reader.f32_array(out_f)
        return DenseLayer(out_f, in_f, weights, biases)
    except ValueError as exc:
        reader.fail(str(exc))


def _load_spec_binary(blob: bytes, path) -> ClassifierSpec:
    reader = _Reader(blob, path)
    if reader.take(4) != MAGIC:
        reader.fail("bad magic")
    version = reader.u32()
    if version != FORMAT_VERSION:
        reader.fail(f"unsupported format version {version}")
    input_size = reader.u32()
    input_channels = reader.u32()
    n_classes = reader.u32()
    if n_classes > 100_000:
        reader.fail(f"implausible class count {n_classes}")
    labels = []
    for _ in range(n_classes):
        length = reader.u32()
        labels.append(reader.take(length).decode("utf-8"))
    n_layers = reader.u32()
    if n_layers > 10_000:
        reader.fail(f"implausible layer count {n_layers}")
    layers = [_layer_from_reader(reader, i) for i in range(n_layers)]
    reader.context = "trailer"
    if reader.offset != len(blob):
        reader.fail(f"{len(blob) - reader.offset} trailing bytes")
    try:
        return ClassifierSpec(input_size, input_channels, tuple(labels), tuple(layers))
    except ValueError as exc:
        raise SpecLoadError(f"{path}: {exc}") from exc


def _layer_to_json(layer: Layer) -> dict:
    if isinstance(layer, ConvLayer):
        return {
            "kind": "conv",
            "out_channels": layer.out_channels,
            "in_channels": layer.in_channels,
            "kernel": [layer.kernel_h, layer.kernel_w],
            "stride": layer.stride,
            "padding": layer.padding,
            "weights": [float(v) for v in layer.weights.reshape(-1)],
            "biases": [float(v) for v in layer.biases],
        }
    if isinstance(layer, MaxPoolLayer):
        return {"kind": "maxpool", "window": layer.window, "stride": layer.stride}
    if isinstance(layer, DenseLayer):
        return {
            "kind": "dense",
            "out_features": layer.out_features,
            "in_features": layer.in_features,
            "weights": [float(v) for v in layer.weights.reshape(-1)],
            "biases": [float(v) for v in layer.biases],
        }
    return {"kind": layer.kind}


def write_spec_json(spec: ClassifierSpec, path) -> None:
    """Serialize a spec to the JSON mirror format."""
    doc = {
        "format": "leafattack-classifier",
        "version": FORMAT_VERSION,
        "input_size": spec.input_size,
        "input_channels": spec.input_channels,
        "class_labels": list(spec.class_labels),
        "layers": [_layer_to_json(layer) for layer in spec.layers],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def _layer_from_json(entry: dict, index: int) -> Layer:
    def fail(msg: str):
        raise SpecLoadError(f"layer {index}: {msg}")

    if not isinstance(entry, dict) or "kind" not in entry:
        fail("each layer must be an object with a 'kind'")
    kind = entry["kind"]
    try:
        if kind == "conv":
            out_ch = int(entry["out_channels"])
            in_ch = int(entry["in_channels"])
            kh, kw = (int(v) for v in entry["kernel"])
            weights = np.asarray(entry["weights"], dtype=np.float32).reshape(out_ch, in_ch, kh, kw)
            biases = np.asarray(entry["biases"], dtype=np.float32)
            return ConvLayer(out_ch, in_ch, kh, kw, int(entry.get("stride", 1)), int(entry.get("padding", 0)), weights, biases)
        if kind == "relu":
            return ReluLayer()
        if kind == "maxpool":
            return MaxPoolLayer(int(entry["window"]), int(entry.get("stride", entry["window"])))
        if kind == "flatten":
            return FlattenLayer()
        if kind == "dense":
            out_f = int(entry["out_features"])
            in_f = int(entry["in_features"])
            weights = np.asarray(entry["weights"], dtype=np.float32).reshape(out_f, in_f)
            biases = np.asarray(entry["biases"], dtype=np.float32)
            return DenseLayer(out_f, in_f, weights, biases)
    except (KeyError, TypeError, ValueError) as exc:
        fail(str(exc))
    fail(f"unknown layer kind {kind!r}")


def _load_spec_json(blob: bytes, path) -> ClassifierSpec:
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SpecLoadError(f"{path}: neither LCNN binary nor JSON ({exc})") from exc
    try:
        layers = tuple(_layer_from_json(entry, i) for i, entry in enumerate(doc["layers"]))
        return ClassifierSpec(
            int(doc["input_size"]),
            int(doc["input_channels"]),
            tuple(str(c) for c in doc["class_labels"]),
            layers,
        )
    except SpecLoadError as exc:
        raise SpecLoadError(f"{path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecLoadError(f"{path}: {exc}") from exc


def load_spec(path) -> ClassifierSpec:
    """Load a classifier from a binary (LCNN magic) or JSON weights file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise SpecLoadError(f"{path}: {exc}") from exc
    if blob[:4] == MAGIC:
        return _load_spec_binary(blob, path)
    return _load_spec_json(blob, path)


def default_classifier_spec(seed: int = 0) -> ClassifierSpec:
    """The default architecture with seeded random weights.

    Three 3x3 conv/relu/pool blocks (32, 64, 128 channels) over 32x32 RGB
    input, flattened into a dense layer with one output per class. Random
    weights are only useful as a deterministic stand-in; real weights should
    be trained externally and saved with :func:`write_spec_binary`.
    """
    rng = np.random.default_rng(seed)

    def he(shape, fan_in):
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(np.float32)

    layers = []
    in_ch = 3
    size = 32
    for out_ch in (32, 64, 128):
        layers.append(ConvLayer(out_ch, in_ch, 3, 3, 1, 1, he((out_ch, in_ch, 3, 3), in_ch * 9), np.zeros(out_ch, dtype=np.float32)))
        layers.append(ReluLayer())
        layers.append(MaxPoolLayer(2, 2))
        in_ch = out_ch
        size //= 2
    flat = in_ch * size * size
    layers.append(FlattenLayer())
    n_classes = len(DEFAULT_CLASS_LABELS)
    layers.append(DenseLayer(n_classes, flat, he((n_classes, flat), flat), np.zeros(n_classes, dtype=np.float32)))
    return ClassifierSpec(32, 3, DEFAULT_CLASS_LABELS, tuple(layers))


Classify = Callable[[RasterImage], Probabilities]
