"""Soft correspondences and the training objectives built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .geom import PointMap

MODES = ("nn_only", "nn_plus_sym_nn", "supervised_comm", "unsupervised_comm")
COMM_NORMS = ("squared_frobenius", "frobenius_eps")
DEFAULT_GAMMA = {"nn_only": 0.0, "nn_plus_sym_nn": 1.0, "supervised_comm": 1.0, "unsupervised_comm": 0.2}
FROBENIUS_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.3
    gamma: float | None = None  # None -> per-mode default
    mode: str = "supervised_comm"
    comm_norm: str = "squared_frobenius"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown loss mode {self.mode!r}; expected one of {MODES}")
        if self.comm_norm not in COMM_NORMS:
            raise ValueError(f"unknown comm_norm {self.comm_norm!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def weight(self) -> float:
        return DEFAULT_GAMMA[self.mode] if self.gamma is None else float(self.gamma)

    @property
    def needs_symmetry(self) -> bool:
        return self.mode in ("nn_plus_sym_nn", "supervised_comm")

    @property
    def needs_flip(self) -> bool:
        return self.mode in ("nn_plus_sym_nn", "unsupervised_comm")


def soft_correspondence(phi_x: ad.Tensor, phi_y: ad.Tensor, tau: float = 0.3) -> ad.Tensor:
    """Row-stochastic S with S[i, j] = softmax_j(<phi_x[i], phi_y[j]> / tau)."""
    if phi_x.shape[1] != phi_y.shape[1]:
        raise ValueError(f"embedding widths differ: {phi_x.shape[1]} vs {phi_y.shape[1]}")
    return ad.row_softmax(ad.matmul(phi_x, ad.transpose(phi_y)), tau)


def nn_loss(S: ad.Tensor, py, gt_targets) -> ad.Tensor:
    """Squared error of transferring target coordinates through S."""
    py = np.asarray(py, dtype=np.float64)
    gt_targets = np.asarray(gt_targets, dtype=np.float64)
    if S.shape[1] != len(py) or gt_targets.shape != (S.shape[0], py.shape[1]):
        raise ValueError(f"nn_loss shape mismatch: S {S.shape}, P_y {py.shape}, targets {gt_targets.shape}")
    return ad.frobenius_sq(ad.sub(ad.matmul(S, ad.Tensor(py)), ad.Tensor(gt_targets)))


def _norm(diff: ad.Tensor, comm_norm: str) -> ad.Tensor:
    sq = ad.frobenius_sq(diff)
    if comm_norm == "squared_frobenius":
        return sq
    return ad.sqrt(ad.add(sq, ad.Tensor(FROBENIUS_EPS)))


def comm_loss_supervised(
    S_xy: ad.Tensor, sym_x: PointMap, sym_y: PointMap, comm_norm: str = "squared_frobenius"
) -> ad.Tensor:
    """|| Tx S - S Ty || with the symmetry matrices applied as index gathers."""
    nx, ny = S_xy.shape
    if len(sym_x) != nx or len(sym_y) != ny:
        raise ValueError(f"symmetry sizes ({len(sym_x)}, {len(sym_y)}) do not match S {S_xy.shape}")
    left = ad.gather_rows(S_xy, sym_x.targets)
    right = ad.scatter_cols(S_xy, sym_y.targets, ny)
    return _norm(ad.sub(left, right), comm_norm)


def comm_loss_unsupervised(
    S_xfx: ad.Tensor, S_xy: ad.Tensor, S_yyf: ad.Tensor, comm_norm: str = "squared_frobenius"
) -> ad.Tensor:
    """|| S_{Xf X} S_XY - S_XY S_{Y Yf} ||."""
    nx, ny = S_xy.shape
    if S_xfx.shape != (nx, nx) or S_yyf.shape != (ny, ny):
        raise ValueError(f"shape mismatch: {S_xfx.shape}, {S_xy.shape}, {S_yyf.shape}")
    return _norm(ad.sub(ad.matmul(S_xfx, S_xy), ad.matmul(S_xy, S_yyf)), comm_norm)


def total_loss(cfg: LossConfig, nn, comm=None, nn_sym=None) -> ad.Tensor:
    """Combine per-pair terms according to ``cfg.mode``."""
    nn = ad._as_tensor(nn)
    if cfg.mode == "nn_only":
        return nn
    if cfg.mode == "nn_plus_sym_nn":
        if nn_sym is None:
            raise ValueError("nn_plus_sym_nn needs the symmetry transfer term")
        return ad.add(nn, ad.scale(ad._as_tensor(nn_sym), cfg.weight))
    if comm is None:
        raise ValueError(f"{cfg.mode} needs a commutativity term")
    return ad.add(nn, ad.scale(ad._as_tensor(comm), cfg.weight))


@dataclass
class PairData:
    """One training pair restricted to its sampled points.

    ``gt_targets`` are full-resolution coordinates of the ground-truth images
    of X's samples on Y. ``sym_x``/``sym_y`` are within-sample symmetry maps;
    ``sym_targets_x``/``sym_targets_y`` the coordinates of the symmetric
    images (used by the symmetry transfer term).
    """

    x: np.ndarray
    y: np.ndarray
    gt_targets: np.ndarray
    sym_x: PointMap | None = None
    sym_y: PointMap | None = None
    sym_targets_x: np.ndarray | None = None
    sym_targets_y: np.ndarray | None = None


def pair_terms(cfg: LossConfig, pair: PairData, phi_x, phi_y, phi_xf=None, phi_yf=None) -> dict:
    """Loss components for one pair; keys ``nn``, ``comm``/``nn_sym`` and ``total``."""
    S_xy = soft_correspondence(phi_x, phi_y, cfg.tau)
    terms = {"nn": nn_loss(S_xy, pair.y, pair.gt_targets)}
    if cfg.mode == "supervised_comm":
        if pair.sym_x is None or pair.sym_y is None:
            raise ValueError("supervised_comm needs ground-truth symmetry maps")
        terms["comm"] = comm_loss_supervised(S_xy, pair.sym_x, pair.sym_y, cfg.comm_norm)
    elif cfg.mode == "unsupervised_comm":
        if phi_xf is None or phi_yf is None:
            raise ValueError("unsupervised_comm needs embeddings of the flipped shapes")
        S_xfx = soft_correspondence(phi_xf, phi_x, cfg.tau)
        S_yyf = soft_correspondence(phi_y, phi_yf, cfg.tau)
        terms["comm"] = comm_loss_unsupervised(S_xfx, S_xy, S_yyf, cfg.comm_norm)
    elif cfg.mode == "nn_plus_sym_nn":
        if pair.sym_targets_x is None or pair.sym_targets_y is None or phi_xf is None or phi_yf is None:
            raise ValueError("nn_plus_sym_nn needs symmetry targets and flipped embeddings")
        S_xxf = soft_correspondence(phi_x, phi_xf, cfg.tau)
        S_yyf = soft_correspondence(phi_y, phi_yf, cfg.tau)
        terms["nn_sym"] = ad.add(
            nn_loss(S_xxf, pair.x, pair.sym_targets_x), nn_loss(S_yyf, pair.y, pair.sym_targets_y)
        )
    terms["total"] = total_loss(cfg, terms["nn"], terms.get("comm"), terms.get("nn_sym"))
    return terms
