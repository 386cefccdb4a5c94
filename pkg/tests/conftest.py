import pytest

from uqlab.predstore import IN_DOMAIN, EvalDataset, PredictionRecord


def rec(rid, label, samples, clinical=None, domain=IN_DOMAIN):
    return PredictionRecord(rid, label, domain, tuple(samples), clinical)


def dataset(rows, name=""):
    """rows: iterable of (id, binary_label, samples[, clinical[, domain]])."""
    return EvalDataset(tuple(rec(*r) for r in rows), name)


def oracle_records():
    """Four records, the first one wrong and the only one with non-zero
    uncertainty (ln 2); the others are confident and right."""
    return dataset([
        ("a", 0, [0.4, 0.6]),
        ("b", 1, [1.0]),
        ("c", 0, [0.0]),
        ("d", 1, [1.0, 1.0]),
    ])


@pytest.fixture
def oracle_fixture():
    return oracle_records()


def gradcheck_worst(kind, activation="tanh", seed=0, n_coords=100, h=1e-5, tied_mean=True, kl_weight=0.7):
    """Worst relative error between the analytic gradient of the training
    objective and central finite differences, on a 2-8-1 MLP and 16 points."""
    import numpy as np

    from uqlab.bnnlab.mlp import MlpArchitecture
    from uqlab.bnnlab.posteriors import PriorConfig, draw_noise, flatten, init_posterior, unflatten
    from uqlab.bnnlab.training import objective

    rng = np.random.default_rng(seed)
    arch = MlpArchitecture((2, 8, 1), activation)
    spec = init_posterior(kind, arch, rng, dropout_rate=0.3, init_rho=-2.0)
    x = rng.standard_normal((16, 2))
    y = rng.integers(0, 2, 16)
    noises = [draw_noise(spec, rng)]
    prior = PriorConfig(1.0, None, tied_mean)
    _, grads = objective(spec, x, y, noises, prior, 16, kl_weight)
    analytic = flatten(grads, spec.kind)
    theta = flatten(spec)
    # the net has fewer than 100 parameters, so coordinates repeat
    coords = rng.integers(0, theta.size, n_coords)
    worst = 0.0
    for i in coords:
        step = np.zeros_like(theta)
        step[i] = h
        lp, _ = objective(unflatten(spec, theta + step), x, y, noises, prior, 16, kl_weight)
        lm, _ = objective(unflatten(spec, theta - step), x, y, noises, prior, 16, kl_weight)
        numeric = (lp - lm) / (2 * h)
        scale = max(abs(analytic[i]), abs(numeric))
        worst = max(worst, 0.0 if scale == 0 else abs(analytic[i] - numeric) / scale)
    return worst


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
