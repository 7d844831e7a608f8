"""CNN encoder and conditional masked autoregressive flow."""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from hemo_sbi.core.exceptions import DomainError
from hemo_sbi.schemas.npe import EncoderConfig, FlowConfig, NormalizationStats, Precision
from hemo_sbi.schemas.signals import Modality

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


class Encoder(nn.Module):
    """Unpadded convolutional stack mapping ``(batch, 1, L)`` to a flat embedding."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        self.config = config
        layers: list[nn.Module] = []
        channels = 1
        for layer in config.head:
            layers += [nn.Conv1d(channels, layer.channels, layer.kernel_size, layer.stride), nn.ReLU()]
            channels = layer.channels
        layers.append(nn.MaxPool1d(config.pool_kernel, config.pool_stride))
        for layer in config.tail:
            layers += [nn.Conv1d(channels, layer.channels, layer.kernel_size, layer.stride), nn.ReLU()]
            channels = layer.channels
        self.net = nn.Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        if x.dim() == 2:
            x = x.unsqueeze(1)
        return self.net(x).flatten(start_dim=1)


# ---------------------------------------------------------------------------
# MADE conditioner
# ---------------------------------------------------------------------------


def made_mask(in_features: int, out_features: int, flow_features: int, kind: str) -> Tensor:
    """Connectivity mask for a MADE layer.

    ``kind`` is ``"input"``, ``"hidden"`` or ``"output"``. Hidden units carry
    degrees ``-1 .. D-2`` and see inputs up to their degree; degree ``-1``
    units see the context only. Output unit ``i`` (and ``i + D`` for the
    second parameter block) has degree ``i - 1``, so it only sees inputs
    ``< i`` and the first feature still depends on the context.
    """
    if kind == "input":
        in_deg = torch.arange(in_features) % flow_features
    else:
        in_deg = torch.arange(in_features) % flow_features - 1
    out_deg = torch.arange(out_features) % flow_features - 1
    return (out_deg.unsqueeze(-1) >= in_deg.unsqueeze(0)).to(torch.get_default_dtype())


class MaskedLinear(nn.Module):
    """Linear layer with a fixed connectivity mask and optional context input."""

    mask: Tensor

    def __init__(
        self, in_features: int, out_features: int, mask: Tensor, context_features: int | None = None
    ) -> None:
        super().__init__()
        self.linear = nn.Linear(in_features, out_features)
        self.cond_linear = (
            nn.Linear(context_features, out_features, bias=False) if context_features else None
        )
        self.register_buffer("mask", mask)

    def forward(self, inputs: Tensor, context: Tensor | None = None) -> Tensor:
        out = F.linear(inputs, self.linear.weight * self.mask, self.linear.bias)
        if self.cond_linear is not None and context is not None:
            out = out + self.cond_linear(context)
        return out


class MADE(nn.Module):
    """Conditioner returning ``(mu, log_scale)`` with autoregressive structure."""

    def __init__(self, features: int, hidden: int, layers: int, context: int, clamp: float) -> None:
        super().__init__()
        self.features = features
        self.clamp = clamp
        self.joiner = MaskedLinear(
            features, hidden, made_mask(features, hidden, features, "input"), context
        )
        self.hidden = nn.ModuleList(
            MaskedLinear(hidden, hidden, made_mask(hidden, hidden, features, "hidden"))
            for _ in range(layers - 1)
        )
        self.output = MaskedLinear(
            hidden, 2 * features, made_mask(hidden, 2 * features, features, "output")
        )
        # Identity transform at initialization
        nn.init.zeros_(self.output.linear.weight)
        nn.init.zeros_(self.output.linear.bias)

    def forward(self, inputs: Tensor, context: Tensor) -> tuple[Tensor, Tensor]:
        h = F.relu(self.joiner(inputs, context))
        for layer in self.hidden:
            h = F.relu(layer(h))
        mu, raw = self.output(h).chunk(2, dim=-1)
        return mu, raw.clamp(-self.clamp, self.clamp)


class AffineAutoregressiveStep(nn.Module):
    """``u_i = phi_i * exp(sigma_i) + mu_i`` with ``(mu, sigma)`` from ``phi_<i``."""

    def __init__(self, config: FlowConfig, context: int) -> None:
        super().__init__()
        self.made = MADE(
            config.features, config.hidden_features, config.hidden_layers, context, config.scale_clamp
        )

    def forward(self, phi: Tensor, context: Tensor) -> tuple[Tensor, Tensor]:
        mu, sigma = self.made(phi, context)
        return phi * torch.exp(sigma) + mu, sigma.sum(dim=-1)

    def inverse(self, u: Tensor, context: Tensor) -> Tensor:
        phi = torch.zeros_like(u)
        for i in range(u.shape[-1]):
            mu, sigma = self.made(phi, context)
            phi = phi.clone()
            phi[:, i] = (u[:, i] - mu[:, i]) * torch.exp(-sigma[:, i])
        return phi


class ConditionalFlow(nn.Module):
    """Stack of affine autoregressive steps with a reversal between steps."""

    def __init__(self, config: FlowConfig, context: int) -> None:
        super().__init__()
        self.config = config
        self.steps = nn.ModuleList(AffineAutoregressiveStep(config, context) for _ in range(config.steps))

    @staticmethod
    def _permute(x: Tensor) -> Tensor:
        return x.flip(-1)

    def forward(self, phi: Tensor, context: Tensor) -> tuple[Tensor, Tensor]:
        """Map parameters to the base space; returns ``(z, log|det J|)``."""
        logdet = phi.new_zeros(phi.shape[0])
        x = phi
        for k, step in enumerate(self.steps):
            if k:
                x = self._permute(x)
            x, ld = step(x, context)
            logdet = logdet + ld
        return x, logdet

    def inverse(self, z: Tensor, context: Tensor) -> Tensor:
        x = z
        for k in reversed(range(len(self.steps))):
            x = self.steps[k].inverse(x, context)  # type: ignore[operator]
            if k:
                x = self._permute(x)
        return x

    def log_prob(self, phi: Tensor, context: Tensor) -> Tensor:
        z, logdet = self.forward(phi, context)
        base = -0.5 * (z * z).sum(dim=-1) - 0.5 * z.shape[-1] * _LOG_2PI
        return base + logdet

    def sample(self, context: Tensor, generator: torch.Generator | None = None) -> Tensor:
        """One draw per context row."""
        z = torch.randn(
            context.shape[0], self.config.features, generator=generator, dtype=context.dtype
        )
        return self.inverse(z, context)


# ---------------------------------------------------------------------------
# Posterior estimator
# ---------------------------------------------------------------------------


class PosteriorEstimator(nn.Module):
    """Encoder, flow and the normalization used to feed them.

    Inputs and outputs of the public methods are in physical units; the
    stored statistics map them to the normalized space the networks see.
    """

    def __init__(
        self,
        encoder_config: EncoderConfig | None = None,
        flow_config: FlowConfig | None = None,
        normalization: NormalizationStats | None = None,
        modality: Modality = Modality.APW,
    ) -> None:
        super().__init__()
        self.encoder_config = encoder_config or EncoderConfig()
        self.flow_config = flow_config or FlowConfig()
        self.normalization = normalization or NormalizationStats.identity(self.flow_config.features)
        self.modality = modality
        self.encoder = Encoder(self.encoder_config)
        self.flow = ConditionalFlow(self.flow_config, self.encoder_config.context_size)

    # -- normalization ------------------------------------------------------

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def _tensor(self, values: npt.ArrayLike | Tensor) -> Tensor:
        if isinstance(values, Tensor):
            return values.to(self.dtype)
        return torch.as_tensor(np.asarray(values), dtype=self.dtype)

    def normalize_signal(self, x: npt.ArrayLike | Tensor) -> Tensor:
        n = self.normalization
        return (self._tensor(x) - n.signal_mean) / n.signal_std

    def normalize_age(self, age: npt.ArrayLike | Tensor) -> Tensor:
        c = self.encoder_config
        return (self._tensor(age) - c.age_mean) / c.age_scale

    def normalize_theta(self, theta: npt.ArrayLike | Tensor) -> Tensor:
        n = self.normalization
        return (self._tensor(theta) - self._tensor(n.theta_mean)) / self._tensor(n.theta_std)

    def denormalize_theta(self, theta: Tensor) -> Tensor:
        n = self.normalization
        return theta * self._tensor(n.theta_std) + self._tensor(n.theta_mean)

    @property
    def log_theta_scale(self) -> float:
        return float(np.sum(np.log(self.normalization.theta_std)))

    # -- normalized-space core ----------------------------------------------

    def context(self, x_norm: Tensor, age_norm: Tensor) -> Tensor:
        """Embedding of normalized signals concatenated with normalized age."""
        h = self.encoder(x_norm)
        return torch.cat([h, age_norm.reshape(-1, 1).to(h.dtype)], dim=1)

    def log_prob_normalized(self, theta_norm: Tensor, x_norm: Tensor, age_norm: Tensor) -> Tensor:
        return self.flow.log_prob(theta_norm, self.context(x_norm, age_norm))

    # -- physical-unit API ---------------------------------------------------

    def encode(self, x: npt.ArrayLike | Tensor, age: npt.ArrayLike | Tensor) -> Tensor:
        """Conditioning vectors ``(batch, 91)`` for raw segments and ages (years)."""
        xs = self.normalize_signal(x)
        if xs.dim() == 1:
            xs = xs.unsqueeze(0)
        return self.context(xs, self.normalize_age(age).reshape(-1))

    def log_density(
        self, theta: npt.ArrayLike | Tensor, x: npt.ArrayLike | Tensor, age: npt.ArrayLike | Tensor
    ) -> Tensor:
        """``log p(theta | x, age)`` in physical units, one value per row."""
        th = self.normalize_theta(theta)
        if th.dim() == 1:
            th = th.unsqueeze(0)
        return self.flow.log_prob(th, self.encode(x, age)) - self.log_theta_scale

    @torch.no_grad()
    def sample(
        self, x: npt.ArrayLike | Tensor, age: float, n: int, seed: int | None = None
    ) -> Tensor:
        """Draw *n* biomarker vectors for one segment by sequential inversion."""
        if n < 1:
            raise DomainError("n must be at least 1")
        gen = torch.Generator()
        gen.manual_seed(0 if seed is None else seed)
        h = self.encode(x, [age])
        theta = self.flow.sample(h.expand(n, -1), generator=gen)
        return self.denormalize_theta(theta)

    @torch.no_grad()
    def sample_batch(
        self, x: npt.ArrayLike | Tensor, age: npt.ArrayLike, n: int, seed: int | None = None
    ) -> Tensor:
        """``(batch, n, features)`` draws for several segments at once."""
        gen = torch.Generator()
        gen.manual_seed(0 if seed is None else seed)
        h = self.encode(x, age)
        rows = h.repeat_interleave(n, dim=0)
        theta = self.denormalize_theta(self.flow.sample(rows, generator=gen))
        return theta.reshape(h.shape[0], n, -1)


def torch_dtype(precision: Precision) -> torch.dtype:
    return torch.float64 if precision is Precision.FLOAT64 else torch.float32
