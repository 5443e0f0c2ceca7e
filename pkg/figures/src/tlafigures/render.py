"""Render trajectory and sweep figures from tlamonitor CSV files.

Read-only consumers of the fixed column contract (t, x_c, y_c, z_c, purity,
plus count/v_out detector channels; events files carry t_avalanche; sweep
tables carry omega/quadrature/scaled_p).  No physics is computed here beyond
plotting transforms, and rendering never mutates its inputs.

PNG output strips the auto date field so re-rendering the same inputs is
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (needs the backend set first)

KINDS = ("apd-trajectory", "homodyne-trajectory", "purity-sweep")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_path: Path
    output_path: Path
    events_path: Path | None = None   # APD avalanche markers
    xlim: tuple[float, float] | None = None
    zoom_halfwidth: float = 1.0       # window around the marked avalanche

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")


def load_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a headered CSV and check the column contract."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None,
                         encoding="utf-8")
    if data.dtype.names is None:
        raise ValueError(f"{path}: no header row")
    missing = [c for c in required if c not in data.dtype.names]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}; "
                         f"found {list(data.dtype.names)}")
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    data = np.atleast_1d(data)
    return {name: data[name] for name in data.dtype.names}


def _load_events(path: Path | None) -> np.ndarray:
    if path is None:
        return np.empty(0)
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float,
                         encoding="utf-8")
    if data.dtype.names is None or "t_avalanche" not in data.dtype.names:
        raise ValueError(f"{path}: expected a t_avalanche column")
    return np.atleast_1d(data["t_avalanche"])


def _mark_events(ax, events: np.ndarray) -> None:
    for t in events:
        ax.axvline(t, color="0.6", linewidth=0.8, zorder=0)


def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata={"Date": None})
    plt.close(fig)


def _render_apd(spec: FigureSpec) -> None:
    cols = load_table(spec.input_path, ("t", "y_c", "z_c"))
    events = _load_events(spec.events_path)
    t, y, z = cols["t"], cols["y_c"], cols["z_c"]
    fig, (ax_a, ax_b) = plt.subplots(2, 1, figsize=(6.0, 5.2))
    ax_a.plot(t, z, "k-", linewidth=0.8)
    _mark_events(ax_a, events)
    ax_a.set_xlabel(r"$t\,\Gamma$")
    ax_a.set_ylabel(r"$z_c$")
    ax_a.set_ylim(-1.05, 1.05)
    if spec.xlim:
        ax_a.set_xlim(*spec.xlim)
    # zoom near an avalanche (the second when available, as in the
    # two-panel counting figure), otherwise the trace midpoint
    center = events[1] if len(events) > 1 else (
        events[0] if len(events) else 0.5 * (t[0] + t[-1]))
    lo, hi = center - spec.zoom_halfwidth, center + spec.zoom_halfwidth
    sel = (t >= lo) & (t <= hi)
    if not sel.any():
        sel = slice(None)
    ax_b.plot(t[sel], z[sel], "k-", linewidth=1.0, label=r"$z_c$")
    ax_b.plot(t[sel], y[sel], "k-.", linewidth=1.0, label=r"$y_c$")
    _mark_events(ax_b, events[(events >= lo) & (events <= hi)])
    ax_b.set_xlabel(r"$t\,\Gamma$")
    ax_b.set_ylabel(r"$z_c,\ y_c$")
    ax_b.set_ylim(-1.05, 1.05)
    ax_b.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output_path)


def _render_homodyne(spec: FigureSpec) -> None:
    cols = load_table(spec.input_path, ("t", "x_c", "z_c", "v_out"))
    t = cols["t"]
    fig, (ax_a, ax_b) = plt.subplots(2, 1, figsize=(6.0, 5.2), sharex=True)
    ax_a.plot(t, cols["x_c"], "k:", linewidth=1.0, label=r"$x_c$")
    ax_a.plot(t, cols["z_c"], "k-", linewidth=0.8, label=r"$z_c$")
    ax_a.set_ylabel(r"$x_c,\ z_c$")
    ax_a.set_ylim(-1.05, 1.05)
    ax_a.legend(loc="upper right", fontsize=8)
    v = cols["v_out"]
    good = np.isfinite(v)
    ax_b.plot(t[good], v[good], "k-", linewidth=0.6)
    ax_b.set_xlabel(r"$t\,\Gamma$")
    ax_b.set_ylabel(r"$\mathcal{V}$ (dimensionless)")
    if spec.xlim:
        ax_b.set_xlim(*spec.xlim)
    fig.tight_layout()
    _save(fig, spec.output_path)


def _render_sweep(spec: FigureSpec) -> None:
    cols = load_table(spec.input_path,
                      ("omega", "quadrature", "scaled_p"))
    quad = np.asarray(cols["quadrature"], dtype=str)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    styles = {"x": ("k:", "o"), "y": ("k-.", "s")}
    for label, (ls, marker) in styles.items():
        sel = quad == label
        if not sel.any():
            raise ValueError(
                f"{spec.input_path}: sweep table has no rows for "
                f"quadrature {label!r}")
        order = np.argsort(cols["omega"][sel])
        ax.plot(cols["omega"][sel][order], cols["scaled_p"][sel][order],
                ls, marker=marker, markersize=3.5,
                label=f"homodyne ${label}$")
    ax.set_xlabel(r"$\Omega/\Gamma$")
    ax.set_ylabel("scaled purity")
    ax.legend(fontsize=8)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    fig.tight_layout()
    _save(fig, spec.output_path)


def render(spec: FigureSpec) -> Path:
    """Render the figure described by spec; returns the output path."""
    if spec.kind == "apd-trajectory":
        _render_apd(spec)
    elif spec.kind == "homodyne-trajectory":
        _render_homodyne(spec)
    else:
        _render_sweep(spec)
    return Path(spec.output_path)
