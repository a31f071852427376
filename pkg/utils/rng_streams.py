# utils/rng_streams.py
"""
One seed, many independent streams.

Stream layout:
  • 0      – the chain itself (t-walk steps, index chain of `combine`)
  • 1      – default start points of `run`
  • k      – row k of the normalising-constant grid (`table1`)
"""
import numpy as np

CHAIN_STREAM = 0
START_STREAM = 1


def make_rng(seed: int, stream: int = CHAIN_STREAM) -> np.random.Generator:
    children = np.random.SeedSequence(int(seed)).spawn(stream + 1)
    return np.random.default_rng(children[stream])


def log_uniform(rng: np.random.Generator) -> float:
    """log Ω for Ω ~ Unif(0, 1]; never −∞."""
    return float(np.log1p(-rng.random()))
