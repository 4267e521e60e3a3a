try:
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
except ImportError:
    raise ImportError(
        "primerace plotting requires matplotlib to be installed. "
        "Install it with 'pip install primerace[PLOT]'.")


def overlay_curve(path, xs, reconstructed, sieved=None, T=None, xlabel='x', ylabel='value', logx=True):
    """Write an SVG overlay of a zero-sum reconstruction and, optionally, its sieved counterpart."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    label = f'zeros to T={T:g}' if T is not None else 'zeros'
    ax.plot(xs, reconstructed, lw=1.0, label=label)
    if sieved is not None:
        ax.step(xs, sieved, where='post', lw=0.8, color='k', label='sieve')
    ax.axhline(0, color='grey', lw=0.5)
    if logx:
        ax.set_xscale('log')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def race_curve(path, xs, values, title=None):
    """Step plot of a race difference against x."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.step(xs, values, where='post', lw=0.8)
    ax.axhline(0, color='grey', lw=0.5)
    ax.set_xlabel('x')
    ax.set_ylabel('difference')
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def margin_profile(path, log_x, margins, envelope=None):
    """Barrier exclusion margin (and envelope) against log x."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(log_x, margins, lw=1.0, label='violation')
    if envelope is not None:
        ax.plot(log_x, envelope, lw=0.8, ls='--', label='envelope')
        ax.set_yscale('symlog')
    ax.set_xlabel('log x')
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path
