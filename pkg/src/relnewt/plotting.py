"""Standalone SVG figures (trajectories, nu winding, Phi0 integrand)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Date": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _boundary(ax, domain):
    t = np.linspace(0, 2 * np.pi, 361)
    p = domain.point(t)
    ax.plot(p[:, 0], p[:, 1], color="0.3", lw=1)
    ax.set_aspect("equal")


def plot_trajectories(trajectories, domain, path, title=""):
    """Trajectories (each with an ``x`` sample array) inside the domain boundary."""
    fig, ax = plt.subplots(figsize=(5, 5))
    _boundary(ax, domain)
    for tr in trajectories:
        ax.plot(tr.x[:, 0], tr.x[:, 1], lw=0.8)
    ax.set_title(title)
    _save(fig, path)


def plot_winding(theta, alpha, path, title=""):
    """Unwrapped angle of ``nu`` against the boundary parameter."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(theta, alpha - alpha[0], lw=1)
    ax.plot(theta, theta - theta[0], ls="--", color="0.5", lw=0.8)
    ax.set_xlabel("theta")
    ax.set_ylabel("alpha - alpha(0)")
    ax.set_title(title)
    _save(fig, path)


def plot_phi0_integrand(fld, density, path, title=""):
    """Heatmap of the Phi0 density over ``(theta_zeta, beta)``."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    order = np.argsort(fld.beta)
    im = ax.pcolormesh(fld.beta[order], fld.theta_zeta, density[:, order], shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("beta = theta_x - theta_zeta")
    ax.set_ylabel("theta_zeta")
    ax.set_title(title)
    _save(fig, path)
