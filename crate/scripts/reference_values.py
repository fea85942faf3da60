"""High-precision reference values for the toy model.

Evaluates f_k and u*(t, T, y) from the original x-space integrals with
mpmath adaptive quadrature at 40 digits. The frozen constants in the Rust
tests were produced with this script.

    python3 scripts/reference_values.py
"""

import mpmath as mp

mp.mp.dps = 40

GAMMAS = [1, 2, 3]
PRIOR = [mp.mpf("0.3"), mp.mpf("0.3"), mp.mpf("0.4")]


def fractions(alpha, horizon, t=0, y=0, gammas=GAMMAS, prior=PRIOR, sigma=1):
    a = mp.mpf(alpha)
    beta = 1 / (1 - a)
    horizon = mp.mpf(horizon)
    tau = horizon - t

    def log_terms(x):
        return [mp.log(p) + g * (y + x) - g**2 * horizon / 2 for g, p in zip(gammas, prior)]

    def log_f(x):
        ls = log_terms(x)
        m = max(ls)
        return m + mp.log(sum(mp.e ** (l - m) for l in ls))

    def log_phi(x):
        return -(x**2) / (2 * tau)

    # break points at every tilted mean so mpmath resolves each peak
    pts = sorted(
        set(
            [-30 * mp.sqrt(tau) + min(0, beta * min(gammas) * tau)]
            + [beta * g * tau for g in gammas]
            + [0, beta * max(gammas) * tau + 30 * mp.sqrt(tau)]
        )
    )
    shift = max(beta * log_f(x) + log_phi(x) for x in pts)
    den = mp.quad(lambda x: mp.e ** (beta * log_f(x) + log_phi(x) - shift), pts)
    nums = [
        mp.quad(
            lambda x, k=k: mp.e ** ((beta - 1) * log_f(x) + log_terms(x)[k] + log_phi(x) - shift),
            pts,
        )
        for k in range(len(gammas))
    ]
    f = [n / den for n in nums]
    v = sum(g * fk for g, fk in zip(gammas, f))
    return f, v / (sigma * (1 - a))


def show(label, f, u):
    print(label, [mp.nstr(x, 17) for x in f], mp.nstr(u, 17))


if __name__ == "__main__":
    for alpha in [0.5, -0.5]:
        for horizon in [1, 2, 4, 8, 16, 32, 64]:
            show(f"alpha={alpha} T={horizon}", *fractions(alpha, horizon))
    for alpha in [-0.9, -0.5, 0.2, 0.5, 0.8]:
        show(f"profile alpha={alpha} T=5", *fractions(alpha, 5))
    show("alpha=0.5 t=0.5 T=2 y=0.7", *fractions(0.5, 2, t=0.5, y=0.7))
    show("alpha=-2 t=1 T=3 y=-0.4", *fractions(-2, 3, t=1, y=-0.4))
    for alpha in [1e-3, -1e-3]:
        show(f"alpha={alpha} T=1", *fractions(alpha, 1))
