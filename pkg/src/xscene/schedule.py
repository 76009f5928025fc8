"""Noise schedule and reverse-process steps shared by all diffusion models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch


@dataclass(frozen=True)
class DiffusionSchedule:
    """Timestep count, cumulative-alpha table, and sampler configuration.

    ``alpha_bar`` is indexed by t in [0, T] with alpha_bar[0] == 1; the table
    is strictly decreasing and stays in (0, 1].
    """

    timesteps: int
    betas: np.ndarray
    alpha_bar: np.ndarray
    sampler: str = "ancestral"
    cfg_scale: float = 1.0
    kind: str = "cosine"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ab = np.ascontiguousarray(self.alpha_bar, dtype=np.float64)
        betas = np.ascontiguousarray(self.betas, dtype=np.float64)
        if ab.shape != (self.timesteps + 1,):
            raise ValueError(f"alpha_bar must have length T+1, got {ab.shape}")
        if betas.shape != (self.timesteps,):
            raise ValueError(f"betas must have length T, got {betas.shape}")
        if not np.isclose(ab[0], 1.0):
            raise ValueError("alpha_bar[0] must be 1")
        if np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if np.any(ab <= 0) or np.any(ab > 1):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        ab.flags.writeable = False
        betas.flags.writeable = False
        object.__setattr__(self, "alpha_bar", ab)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def cosine(
        cls,
        timesteps: int = 100,
        offset: float = 0.008,
        max_beta: float = 0.999,
        sampler: str = "ancestral",
        cfg_scale: float = 1.0,
    ) -> "DiffusionSchedule":
        t = np.arange(timesteps + 1, dtype=np.float64)
        f = np.cos((t / timesteps + offset) / (1 + offset) * np.pi / 2.0) ** 2
        alpha_bar = f / f[0]
        betas = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 0.0, max_beta)
        # Rebuild the table from the clipped betas so the two stay consistent.
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return cls(
            timesteps=timesteps,
            betas=betas,
            alpha_bar=alpha_bar,
            sampler=sampler,
            cfg_scale=cfg_scale,
            kind="cosine",
            params={"offset": offset, "max_beta": max_beta},
        )

    def to_doc(self) -> dict:
        return {
            "timesteps": self.timesteps,
            "kind": self.kind,
            "params": dict(self.params),
            "sampler": self.sampler,
            "cfg_scale": self.cfg_scale,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DiffusionSchedule":
        if doc["kind"] != "cosine":
            raise ValueError(f"unknown schedule kind {doc['kind']!r}")
        return cls.cosine(
            timesteps=doc["timesteps"],
            sampler=doc.get("sampler", "ancestral"),
            cfg_scale=doc.get("cfg_scale", 1.0),
            **doc.get("params", {}),
        )

    # -- forward process -------------------------------------------------

    def add_noise(self, x0: torch.Tensor, t: int, noise: torch.Tensor) -> torch.Tensor:
        """q(x_t | x_0) sample given the noise draw."""
        ab = float(self.alpha_bar[t])
        return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise

    def renoise_one(self, x_t: torch.Tensor, t: int, noise: torch.Tensor) -> torch.Tensor:
        """q(x_{t+1} | x_t) sample, used when a sampler jumps back up."""
        beta = float(self.betas[t])  # beta for the step t -> t+1
        return np.sqrt(1.0 - beta) * x_t + np.sqrt(beta) * noise

    # -- reverse process --------------------------------------------------

    def reverse_step(
        self, x_t: torch.Tensor, t: int, eps_hat: torch.Tensor, noise: torch.Tensor
    ) -> torch.Tensor:
        """Ancestral DDPM posterior sample for x_{t-1}; noise ignored at t=1."""
        if not 1 <= t <= self.timesteps:
            raise ValueError(f"t must be in [1, T], got {t}")
        beta = float(self.betas[t - 1])
        alpha = 1.0 - beta
        ab_t = float(self.alpha_bar[t])
        ab_prev = float(self.alpha_bar[t - 1])
        mean = (x_t - beta / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(alpha)
        if t == 1:
            return mean
        var = beta * (1.0 - ab_prev) / (1.0 - ab_t)
        return mean + np.sqrt(var) * noise

    def ddim_step(
        self, x_t: torch.Tensor, t: int, t_prev: int, eps_hat: torch.Tensor
    ) -> torch.Tensor:
        """Deterministic (eta=0) step from t to t_prev, t_prev < t."""
        ab_t = float(self.alpha_bar[t])
        ab_prev = float(self.alpha_bar[t_prev])
        x0_hat = (x_t - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t)
        return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_hat

    def strided_times(self, steps: int) -> list[int]:
        """Descending t sequence for the fast sampler, ending at 0."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        ts = np.unique(np.linspace(0, self.timesteps, steps + 1).round().astype(int))
        return list(ts[::-1])


def repaint_time_sequence(timesteps: int, jump_length: int, n_resample: int) -> list[int]:
    """Timestep walk with periodic re-noising jumps.

    Returns a sequence of t values starting at T; consecutive entries differ
    by -1 (one reverse step) or +1 (one forward re-noising step). Each jump
    point is revisited ``n_resample`` times in total.
    """
    jumps = {j: n_resample - 1 for j in range(0, timesteps - jump_length, jump_length)}
    t = timesteps
    seq = [t]
    while t > 0:
        t -= 1
        seq.append(t)
        if jumps.get(t, 0) > 0:
            jumps[t] -= 1
            for _ in range(jump_length):
                t += 1
                seq.append(t)
    return seq
