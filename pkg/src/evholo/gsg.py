"""Global spectral gating operator and its gradient verification.

The forward path is

    x_local = depthwise_conv3x3(x_in)                 local embedding
    z       = irfft2(rfft2(x_local) * W)  per channel  global spectral filter
    g       = SiLU(LN(z)) * sigmoid(Wg @ z + b)        gated reconstruction
    x_out   = x_in + g                                 residual fusion

with LayerNorm taken across channels at each spatial location. The only
analytic gradient provided is dL/dW for the complex spectral weights under
the probe loss L = sum(x_out * upstream); everything else is reachable
through the generic central-difference machinery, which doubles as the
oracle for the analytic path.

Gradient convention: each complex weight is two real parameters (re, im),
and the returned gradient tensor packs dL/d(re) + 1j * dL/d(im).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensorio
from .errors import NonFinite, ParseError, SelectorOutOfRange, ShapeMismatch

LN_EPS = 1e-5

#: Archive section names, also the canonical flattened-parameter order used
#: by the finite-difference selector.
PARAM_SECTIONS = (
    "dw_kernel",
    "spectral_weight_re",
    "spectral_weight_im",
    "ln_gamma",
    "ln_beta",
    "gate_weight",
    "gate_bias",
)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # branch on sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def _as_feature(x) -> np.ndarray:
    """Validate a C x rows x cols real feature tensor, preserving f32/f64."""
    a = np.asarray(x)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    if a.ndim != 3 or a.size == 0:
        raise ShapeMismatch(f"expected non-empty 3D feature tensor, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFinite("feature tensor contains NaN or Inf")
    return a


@dataclass(frozen=True)
class GsgParams:
    """Immutable parameter bundle for one gating block.

    spectral_weight holds one complex weight per retained half-spectrum bin
    per channel: shape C x rows x (cols // 2 + 1) for the feature shape it
    will be applied to.
    """

    dw_kernel: np.ndarray
    spectral_weight: np.ndarray
    ln_gamma: np.ndarray
    ln_beta: np.ndarray
    gate_weight: np.ndarray
    gate_bias: np.ndarray

    def __post_init__(self):
        dw = np.asarray(self.dw_kernel, dtype=np.float64)
        if dw.ndim != 3 or dw.shape[1:] != (3, 3):
            raise ShapeMismatch(f"dw_kernel must be (C, 3, 3), got {dw.shape}")
        c = dw.shape[0]
        w = np.asarray(self.spectral_weight, dtype=np.complex128)
        if w.ndim != 3 or w.shape[0] != c:
            raise ShapeMismatch(
                f"spectral_weight must be (C={c}, rows, cols//2+1), got {w.shape}"
            )
        vec = {}
        for name in ("ln_gamma", "ln_beta", "gate_bias"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (c,):
                raise ShapeMismatch(f"{name} must have shape ({c},), got {v.shape}")
            vec[name] = v
        gw = np.asarray(self.gate_weight, dtype=np.float64)
        if gw.shape != (c, c):
            raise ShapeMismatch(f"gate_weight must be ({c}, {c}), got {gw.shape}")
        for name, arr in (("dw_kernel", dw), ("spectral_weight", w),
                          ("gate_weight", gw), *vec.items()):
            if not np.isfinite(arr).all():
                raise NonFinite(f"{name} contains NaN or Inf")
        object.__setattr__(self, "dw_kernel", dw)
        object.__setattr__(self, "spectral_weight", w)
        object.__setattr__(self, "gate_weight", gw)
        for name, v in vec.items():
            object.__setattr__(self, name, v)

    @property
    def channels(self) -> int:
        return self.dw_kernel.shape[0]

    @classmethod
    def identity(cls, channels: int, rows: int, cols: int) -> "GsgParams":
        """Identity kernels, unit spectral weights, unit LN affine, gate
        saturated open (bias +20): forward becomes x + SiLU(LN(x))."""
        dw = np.zeros((channels, 3, 3))
        dw[:, 1, 1] = 1.0
        return cls(
            dw_kernel=dw,
            spectral_weight=np.ones((channels, rows, cols // 2 + 1), dtype=np.complex128),
            ln_gamma=np.ones(channels),
            ln_beta=np.zeros(channels),
            gate_weight=np.zeros((channels, channels)),
            gate_bias=np.full(channels, 20.0),
        )

    @classmethod
    def random(cls, channels: int, rows: int, cols: int, seed: int = 0) -> "GsgParams":
        """Smooth random parameters near the identity point, for testing."""
        rng = np.random.default_rng(seed)
        hw = cols // 2 + 1
        w = 1.0 + 0.3 * (rng.standard_normal((channels, rows, hw))
                         + 1j * rng.standard_normal((channels, rows, hw)))
        return cls(
            dw_kernel=0.4 * rng.standard_normal((channels, 3, 3)),
            spectral_weight=w,
            ln_gamma=1.0 + 0.2 * rng.standard_normal(channels),
            ln_beta=0.2 * rng.standard_normal(channels),
            gate_weight=rng.standard_normal((channels, channels)) / max(1.0, channels),
            gate_bias=0.5 * rng.standard_normal(channels),
        )


def _check_params_for(x: np.ndarray, params: GsgParams, need_spectral: bool) -> None:
    c, rows, cols = x.shape
    if params.channels != c:
        raise ShapeMismatch(
            f"params built for {params.channels} channels, input has {c}"
        )
    if need_spectral and params.spectral_weight.shape != (c, rows, cols // 2 + 1):
        raise ShapeMismatch(
            f"spectral_weight shape {params.spectral_weight.shape} does not match "
            f"feature shape {x.shape} (expected {(c, rows, cols // 2 + 1)})"
        )


def depthwise_conv3x3(x, kernels) -> np.ndarray:
    """Per-channel 3x3 cross-correlation, stride 1, zero padding 1, no bias."""
    a = _as_feature(x)
    k = np.asarray(kernels, dtype=np.float64)
    if k.ndim != 3 or k.shape[1:] != (3, 3) or k.shape[0] != a.shape[0]:
        raise ShapeMismatch(
            f"kernels must be ({a.shape[0]}, 3, 3), got {k.shape}"
        )
    if not np.isfinite(k).all():
        raise NonFinite("kernels contain NaN or Inf")
    x64 = a.astype(np.float64)
    rows, cols = a.shape[1], a.shape[2]
    xp = np.pad(x64, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(x64)
    for i in range(3):
        for j in range(3):
            out += k[:, i, j][:, None, None] * xp[:, i:i + rows, j:j + cols]
    return out.astype(a.dtype)


def spectral_filter(x_local, w) -> np.ndarray:
    """Per channel: irfft2(rfft2(x_c) * w_c). Output is exactly real-typed."""
    a = _as_feature(x_local)
    wc = np.asarray(w, dtype=np.complex128)
    c, rows, cols = a.shape
    if wc.shape != (c, rows, cols // 2 + 1):
        raise ShapeMismatch(
            f"weights shape {wc.shape} does not match feature shape {a.shape} "
            f"(expected {(c, rows, cols // 2 + 1)})"
        )
    if not np.isfinite(wc).all():
        raise NonFinite("weights contain NaN or Inf")
    z = np.fft.rfft2(a.astype(np.float64), axes=(1, 2))
    out = np.fft.irfft2(z * wc, s=(rows, cols), axes=(1, 2))
    return out.astype(a.dtype)


def _gating_forward(z64: np.ndarray, params: GsgParams):
    """Shared forward internals (64-bit); returns everything backward needs."""
    g = params.ln_gamma[:, None, None]
    b = params.ln_beta[:, None, None]
    mu = z64.mean(axis=0)
    zc = z64 - mu
    inv = 1.0 / np.sqrt((zc * zc).mean(axis=0) + LN_EPS)
    zhat = zc * inv
    nrm = g * zhat + b
    sig_n = _sigmoid(nrm)
    carrier = nrm * sig_n
    q = np.einsum("ij,jrc->irc", params.gate_weight, z64) + params.gate_bias[:, None, None]
    gate = _sigmoid(q)
    return zhat, inv, nrm, sig_n, carrier, gate


def gated_reconstruction(z, params: GsgParams) -> np.ndarray:
    """SiLU(LN(z)) * sigmoid(gate_weight @ z + gate_bias), per location.

    LN normalizes across the channel axis at each (row, col) with epsilon
    1e-5 and affine (ln_gamma, ln_beta); the gate is a 1x1 channel
    projection squashed by a sigmoid.
    """
    a = _as_feature(z)
    _check_params_for(a, params, need_spectral=False)
    *_, carrier, gate = _gating_forward(a.astype(np.float64), params)
    return (carrier * gate).astype(a.dtype)


def gsg_forward(x_in, params: GsgParams) -> np.ndarray:
    """x_in + gated_reconstruction(spectral_filter(depthwise_conv3x3(x_in)))."""
    a = _as_feature(x_in)
    _check_params_for(a, params, need_spectral=True)
    x_local = depthwise_conv3x3(a, params.dw_kernel)
    z = spectral_filter(x_local, params.spectral_weight)
    return a + gated_reconstruction(z, params)


def gsg_loss(x_in, params: GsgParams, upstream) -> float:
    """Probe loss sum(gsg_forward(x_in) * upstream) used for gradient checks."""
    a = _as_feature(x_in)
    u = _as_feature(upstream)
    if u.shape != a.shape:
        raise ShapeMismatch(
            f"upstream shape {u.shape} does not match input shape {a.shape}"
        )
    out = gsg_forward(a.astype(np.float64), params)
    return float((out * u.astype(np.float64)).sum())


def _gating_backward(z64: np.ndarray, params: GsgParams, dout: np.ndarray) -> np.ndarray:
    """dL/dz for out = SiLU(LN(z)) * gate(z), given dL/dout."""
    zhat, inv, nrm, sig_n, carrier, gate = _gating_forward(z64, params)
    d_carrier = dout * gate
    dq = dout * carrier * gate * (1.0 - gate)
    dz_gate = np.einsum("ij,irc->jrc", params.gate_weight, dq)
    # SiLU'(n) = sigmoid(n) * (1 + n * (1 - sigmoid(n)))
    dn = d_carrier * sig_n * (1.0 + nrm * (1.0 - sig_n))
    dzhat = dn * params.ln_gamma[:, None, None]
    m1 = dzhat.mean(axis=0)
    m2 = (dzhat * zhat).mean(axis=0)
    return inv * (dzhat - m1 - zhat * m2) + dz_gate


def _half_spectrum_weights(cols: int) -> np.ndarray:
    """Adjoint column weights: 1 at self-conjugate columns, 2 elsewhere.

    Columns 0 (and cols//2 for even widths) appear once in the half-spectrum
    layout; every other retained column stands for itself and its discarded
    conjugate mirror, so its contribution to the loss is doubled.
    """
    hw = cols // 2 + 1
    c = np.full(hw, 2.0)
    c[0] = 1.0
    if cols % 2 == 0:
        c[-1] = 1.0
    return c


def grad_spectral_weight(x_in, params: GsgParams, upstream) -> np.ndarray:
    """Analytic dL/dW for L = sum(gsg_forward(x_in) * upstream).

    Real and imaginary parts of each weight are independent real parameters;
    entry [c, k1, k2] of the result is dL/dRe(W) + 1j * dL/dIm(W). The
    residual term contributes nothing to dL/dW, so the chain is: gating
    backward to dL/dz, then the inverse-real-FFT adjoint (forward rfft2
    scaled by 1/(rows*cols) with the Hermitian column double-counting),
    then the elementwise product rule against conj(rfft2(x_local)).
    """
    a = _as_feature(x_in)
    _check_params_for(a, params, need_spectral=True)
    u = _as_feature(upstream)
    if u.shape != a.shape:
        raise ShapeMismatch(
            f"upstream shape {u.shape} does not match input shape {a.shape}"
        )
    x64 = a.astype(np.float64)
    u64 = u.astype(np.float64)
    rows, cols = a.shape[1], a.shape[2]

    x_local = depthwise_conv3x3(x64, params.dw_kernel)
    zf = np.fft.rfft2(x_local, axes=(1, 2))
    z = np.fft.irfft2(zf * params.spectral_weight, s=(rows, cols), axes=(1, 2))
    u_z = _gating_backward(z, params, u64)
    col_w = _half_spectrum_weights(cols)[None, None, :]
    g_s = np.fft.rfft2(u_z, axes=(1, 2)) * (col_w / (rows * cols))
    return g_s * np.conj(zf)


def _param_layout(params: GsgParams) -> list[tuple[str, int]]:
    w = params.spectral_weight.size
    c = params.channels
    return [
        ("dw_kernel", params.dw_kernel.size),
        ("spectral_weight_re", w),
        ("spectral_weight_im", w),
        ("ln_gamma", c),
        ("ln_beta", c),
        ("gate_weight", params.gate_weight.size),
        ("gate_bias", c),
    ]


def param_component_count(params: GsgParams) -> int:
    """Total scalar parameter components (complex weights count twice)."""
    return sum(size for _, size in _param_layout(params))


def flatten_params(params: GsgParams) -> np.ndarray:
    """All scalar components as one vector, in PARAM_SECTIONS order."""
    w = params.spectral_weight
    return np.concatenate([
        params.dw_kernel.ravel(),
        w.real.ravel(),
        w.imag.ravel(),
        params.ln_gamma,
        params.ln_beta,
        params.gate_weight.ravel(),
        params.gate_bias,
    ])


def unflatten_params(template: GsgParams, theta: np.ndarray) -> GsgParams:
    """Rebuild a GsgParams with template's shapes from a flat vector."""
    expected = param_component_count(template)
    if theta.shape != (expected,):
        raise ShapeMismatch(f"expected {expected} components, got {theta.shape}")
    parts = []
    offset = 0
    for _, size in _param_layout(template):
        parts.append(theta[offset:offset + size])
        offset += size
    wshape = template.spectral_weight.shape
    return GsgParams(
        dw_kernel=parts[0].reshape(template.dw_kernel.shape),
        spectral_weight=(parts[1] + 1j * parts[2]).reshape(wshape),
        ln_gamma=parts[3],
        ln_beta=parts[4],
        gate_weight=parts[5].reshape(template.gate_weight.shape),
        gate_bias=parts[6],
    )


def spectral_weight_selectors(params: GsgParams) -> range:
    """Flat selector indices covering the spectral weights (re block then im)."""
    start = params.dw_kernel.size
    return range(start, start + 2 * params.spectral_weight.size)


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray,
                       index: int, h: float) -> float:
    """(f(theta + h*e_i) - f(theta - h*e_i)) / (2h)."""
    tp = np.array(theta, dtype=np.float64)
    tm = tp.copy()
    tp[index] += h
    tm[index] -= h
    return (f(tp) - f(tm)) / (2.0 * h)


def finite_difference_oracle(x_in, params: GsgParams, upstream,
                             param_selector: int, h: float = 1e-6) -> float:
    """Central-difference dL/dtheta_i through the full forward pass.

    The selector indexes the flattened parameter vector in PARAM_SECTIONS
    order (spectral weights split into a real block then an imaginary one).
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h must lie in [1e-8, 1e-4], got {h}")
    theta = flatten_params(params)
    if not 0 <= param_selector < theta.size:
        raise SelectorOutOfRange(
            f"selector {param_selector} outside 0..{theta.size - 1}"
        )
    def loss_at(vec: np.ndarray) -> float:
        return gsg_loss(x_in, unflatten_params(params, vec), upstream)
    return central_difference(loss_at, theta, param_selector, h)


def check_spectral_weight_gradients(x_in, params: GsgParams, upstream,
                                    h: float = 1e-6) -> float:
    """Max relative error of the analytic spectral-weight gradient against
    the finite-difference oracle over every weight component.

    The relative error floors its denominator at 1e-3 of the gradient's
    max magnitude so components that are incidentally ~0 don't dominate.
    """
    analytic = grad_spectral_weight(x_in, params, upstream)
    an = np.concatenate([analytic.real.ravel(), analytic.imag.ravel()])
    scale = float(np.abs(an).max()) if an.size else 0.0
    worst = 0.0
    for i, sel in enumerate(spectral_weight_selectors(params)):
        fd = finite_difference_oracle(x_in, params, upstream, sel, h)
        denom = max(abs(an[i]), abs(fd), 1e-3 * scale, 1e-12)
        worst = max(worst, abs(an[i] - fd) / denom)
    return worst


def params_to_archive(params: GsgParams) -> bytes:
    """Serialize to the multi-tensor archive (sections in PARAM_SECTIONS order)."""
    w = params.spectral_weight
    return tensorio.write_archive([
        ("dw_kernel", params.dw_kernel),
        ("spectral_weight_re", np.ascontiguousarray(w.real)),
        ("spectral_weight_im", np.ascontiguousarray(w.imag)),
        ("ln_gamma", params.ln_gamma),
        ("ln_beta", params.ln_beta),
        ("gate_weight", params.gate_weight),
        ("gate_bias", params.gate_bias),
    ])


def params_from_archive(data: bytes) -> GsgParams:
    """Inverse of params_to_archive; raises ParseError on missing sections."""
    arch = tensorio.read_archive(data)
    missing = [name for name in PARAM_SECTIONS if name not in arch]
    if missing:
        raise ParseError(f"params archive missing sections: {', '.join(missing)}")
    re, im = arch["spectral_weight_re"], arch["spectral_weight_im"]
    if re.shape != im.shape:
        raise ShapeMismatch(
            f"spectral weight halves disagree: {re.shape} vs {im.shape}"
        )
    return GsgParams(
        dw_kernel=arch["dw_kernel"],
        spectral_weight=re + 1j * im,
        ln_gamma=arch["ln_gamma"],
        ln_beta=arch["ln_beta"],
        gate_weight=arch["gate_weight"],
        gate_bias=arch["gate_bias"],
    )
