"""Moments, diffusivity and small-frequency limit for a set of kernels."""

from nlstefan.kernels import AnnulusUniform, BallUniform, Gaussian, Mixture, Shifted, check_prop12

KERNELS = {
    "gaussian(1)": Gaussian(1.0),
    "ball(1)": BallUniform(1.0),
    "annulus(0.9, 1.1)": AnnulusUniform(0.9, 1.1),
    "ball(2), 2-D": BallUniform(2.0, 2),
    "gaussian mixture, offset": Mixture((0.5, 0.5), (Gaussian(1.0), Shifted(Gaussian(0.5), 1.0))),
}


def main():
    print(f"{'kernel':28s} {'A':>20s} {'fourier limit':>20s} {'rel err':>10s}  ok")
    for name, k in KERNELS.items():
        rep = check_prop12(k)
        rel = abs(rep.fourier_limit_estimate - rep.A) / rep.A
        print(f"{name:28s} {rep.A:20.15f} {rep.fourier_limit_estimate:20.15f} {rel:10.2e}  {rep.prop12_satisfied}")


if __name__ == "__main__":
    main()
