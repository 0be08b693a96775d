"""
Seeded Monte Carlo estimates of estimator mean, bias, variance and MSE.

Noise is drawn in fixed blocks of BLOCK trials.  Block b always comes from
Generator(Philox(SeedSequence(seed, spawn_key=(b,)))) with the ziggurat
standard_normal, so the draws do not depend on how trials are split into
chunks or on how many threads run the chunks.  Chunk results are merged in
chunk order.

Important functions:
simulate: EstimatorStats for one SimulationSpec
estimate_mean_function: estimator means at several points with common
random numbers
"""
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
import logging

import numpy as np

from sparsebound.errors import DimensionError

logger = logging.getLogger(__name__)

BLOCK = 1024
MIN_TRIALS = 100
DEFAULT_CHUNK = 64 * BLOCK


def noise_block(seed, block, size, dim):
    """Standard normal draws of block `block`, shape (size, dim)"""
    bit_generator = np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,)))
    return np.random.Generator(bit_generator).standard_normal((size, dim))


def chunk_noise(seed, start, stop, dim):
    """Noise for trials start..stop-1; start must be a multiple of BLOCK"""
    blocks = []
    for block in range(start // BLOCK, (stop + BLOCK - 1) // BLOCK):
        size = min(BLOCK, stop - block * BLOCK)
        blocks.append(noise_block(seed, block, size, dim))
    return np.concatenate(blocks, axis=0)


@dataclass(frozen=True)
class Moments(object):
    """Count, mean and sum of squared deviations of a stream of samples"""
    n: int
    mean: np.ndarray
    M2: np.ndarray

    @classmethod
    def of(cls, samples):
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, ((samples - mean) ** 2).sum(axis=0))

    def merge(self, other):
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        M2 = self.M2 + other.M2 + delta ** 2 * (self.n * other.n / n)
        return Moments(n, mean, M2)

    @property
    def variance(self):
        return self.M2 / max(self.n - 1, 1)


def _fold(parts):
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total


def _run_chunks(work, chunks, threads):
    if threads > 1 and len(chunks) > 1:
        with ThreadPool(min(threads, len(chunks))) as pool:
            return pool.map(work, chunks)
    return [work(chunk) for chunk in chunks]


@dataclass(frozen=True)
class SimulationSpec(object):
    """Everything that determines a simulation result"""
    model: object
    x0: object
    estimator: object
    n_trials: int = 10**6
    seed: int = 0
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.n_trials < MIN_TRIALS:
            raise DimensionError(f"need at least {MIN_TRIALS} trials, got {self.n_trials}")
        if self.chunk_size < BLOCK or self.chunk_size % BLOCK:
            raise DimensionError(f"chunk size must be a positive multiple of {BLOCK}, got {self.chunk_size}")
        if not 0 <= self.seed < 2**64:
            raise DimensionError(f"seed must be in [0, 2^64), got {self.seed}")
        x0 = np.array(self.model.check_parameter(self.x0), dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, 'x0', x0)

    def chunks(self):
        return [(start, min(start + self.chunk_size, self.n_trials))
                for start in range(0, self.n_trials, self.chunk_size)]


@dataclass(frozen=True)
class EstimatorStats(object):
    n_trials: int
    mean: np.ndarray
    bias: np.ndarray
    component_variances: np.ndarray
    total_variance: float
    mse: float
    se_mean: np.ndarray
    se_component_variances: np.ndarray
    se_total_variance: float
    se_mse: float

    @property
    def bias_norm(self):
        return float(np.linalg.norm(self.bias))


def _estimates(spec, start, stop):
    noise = chunk_noise(spec.seed, start, stop, spec.model.M)
    y = spec.model.H @ spec.x0 + spec.model.sigma * noise
    return spec.estimator(y)


def simulate(spec, threads=1):
    """Monte Carlo statistics of spec.estimator at spec.x0

    Two passes over the same noise: the first gives the mean and the squared
    error, the second the central moments needed for variances and their
    standard errors.
    """
    chunks = spec.chunks()
    logger.debug("simulating %s: %d trials in %d chunks on %d threads",
                 spec.estimator.name, spec.n_trials, len(chunks), threads)

    def first_pass(chunk):
        x_hat = _estimates(spec, *chunk)
        error = np.sum((x_hat - spec.x0) ** 2, axis=1)
        return Moments.of(np.column_stack([x_hat, error]))

    first = _fold(_run_chunks(first_pass, chunks, threads))
    mean = first.mean[:-1]
    n = spec.n_trials
    component_variances = first.variance[:-1]
    total_variance = float(np.sum(component_variances))

    def second_pass(chunk):
        deviation = _estimates(spec, *chunk) - mean
        squared = deviation ** 2
        spread = np.sum(squared, axis=1) - total_variance
        return np.concatenate([squared.sum(axis=0), (squared ** 2).sum(axis=0), [np.sum(spread ** 2)]])

    sums = np.sum(_run_chunks(second_pass, chunks, threads), axis=0)
    N = mean.shape[0]
    m2 = sums[:N] / n
    m4 = sums[N:2 * N] / n
    stats = EstimatorStats(
        n_trials=n,
        mean=mean,
        bias=mean - spec.x0,
        component_variances=component_variances,
        total_variance=total_variance,
        mse=float(first.mean[-1]),
        se_mean=np.sqrt(component_variances / n),
        se_component_variances=np.sqrt(np.maximum(m4 - m2 ** 2, 0.0) / n),
        se_total_variance=float(np.sqrt(sums[-1] / (n - 1) / n)),
        se_mse=float(np.sqrt(first.variance[-1] / n)))
    logger.info("%s: variance %.6g +- %.2g, mse %.6g", spec.estimator.name,
                stats.total_variance, stats.se_total_variance, stats.mse)
    return stats


@dataclass(frozen=True)
class MeanEstimate(object):
    point: np.ndarray
    mean: np.ndarray
    se_mean: np.ndarray


def estimate_mean_function(model, estimator, points, n_trials=10**5, seed=0,
                           chunk_size=DEFAULT_CHUNK, threads=1):
    """Estimator means at every point, reusing the same noise at each point"""
    if n_trials < MIN_TRIALS:
        raise DimensionError(f"need at least {MIN_TRIALS} trials, got {n_trials}")
    points = [np.array(model.check_parameter(p), dtype=float) for p in points]
    if not points:
        raise DimensionError("no points given")
    centers = [model.H @ p for p in points]
    chunks = [(start, min(start + chunk_size, n_trials)) for start in range(0, n_trials, chunk_size)]

    def work(chunk):
        noise = model.sigma * chunk_noise(seed, chunk[0], chunk[1], model.M)
        return [Moments.of(estimator(center + noise)) for center in centers]

    per_chunk = _run_chunks(work, chunks, threads)
    results = []
    for i, point in enumerate(points):
        moments = _fold([parts[i] for parts in per_chunk])
        results.append(MeanEstimate(point=point, mean=moments.mean,
                                    se_mean=np.sqrt(moments.variance / n_trials)))
    return results
