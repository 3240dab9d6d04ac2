from pydantic_settings import BaseSettings
import os

class Settings(BaseSettings):
    # Degenerate (p = q) branch
    degenerate_rel_tol: float = 1e-12

    # Series evaluation
    series_tol: float = 1e-16
    series_term_cap: int = 500
    divergence_window: int = 8
    denominator_floor: float = 1e-250

    # Fock truncation
    tail_tol: float = 1e-14
    auto_dim_tail_tol: float = 1e-24
    auto_dim_start: int = 8
    max_auto_dim: int = 4096

    # Identity suite
    identity_max_index: int = 12

    # Physical units (hbar = m = omega = 1 unless overridden)
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0

    # Family preset defaults
    default_nonsym_q: float = 1.3
    default_sym_q: float = 1.2
    default_fermionic_q: float = 1.5
    default_tammdankov_q: float = 1.1
    default_fibdiv_k: int = 2

    # Parallelism cap for sweeps and suites, 0 = unbounded
    pq_osc_threads: int = int(os.getenv("PQ_OSC_THREADS", "0") or 0)

    # App Settings
    app_name: str = "pq-osc"
    version: str = "1.0.0"
    debug: bool = os.getenv("DEBUG", "False").lower() == "true"

    # API Settings
    api_host: str = "0.0.0.0"
    api_port: int = 8000

    class Config:
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"

settings = Settings()
