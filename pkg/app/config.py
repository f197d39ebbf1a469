from typing import Tuple


class Settings:
    # Nonlinear solve
    residual_tol: float = 1e-12
    max_iterations: int = 200
    damping: float = 1.0
    min_damping: float = 2.0**-20

    # Certificate thresholds
    f_floor_rel: float = 1e-14
    noise_factor: float = 1e6
    a3_tol: float = 1e-3
    bound_slack: float = 1e-8

    # (X, Y) scan domain for T(X, Y)
    scan_resolution: int = 400
    scan_x_min: float = 1e-3
    scan_x_max: float = 1e3
    scan_tol: float = 1e-9
    workers: int = 1

    # Barenblatt scenarios
    slow_t_end: float = 5e-4
    fast_t_final: float = 0.05
    default_n_cells: Tuple[int, ...] = (64, 128, 256)
    default_taus: Tuple[float, ...] = (1e-5, 1e-4)

    log_level: str = "INFO"
    output_dir: str = "runs"
    float_format: str = "%.17g"


settings = Settings()
