"""Deterministic iterative applications for exercising the BSP harness.

Three small kernels with the same shape: per-worker compute against a
shared global state, a fixed-order reduce at the barrier, repeat.  Every
random draw comes from a counter-based generator keyed on (seed, purpose,
indices), so no generator state ever needs checkpointing and any worker
can be respawned mid-run and still draw the same numbers.

State crosses the harness as raw little-endian float64 (or u64) buffers
keyed by segment id: each app publishes one or two global segments plus
one local segment per worker.  Reduction iterates workers in id order, so
runs are bit-for-bit reproducible for a fixed (app, seed, worker count).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

MASK64 = (1 << 64) - 1

APP_PARTICLE_SWARM = "ParticleSwarm"
APP_DIFFERENTIAL_EVOLUTION = "DifferentialEvolution"
APP_JACOBI_SOLVER = "JacobiSolver"
APP_NAMES = (APP_PARTICLE_SWARM, APP_DIFFERENTIAL_EVOLUTION, APP_JACOBI_SOLVER)

# Stream tags keep independent random purposes from colliding.
_TAG_INIT_POS = 1
_TAG_INIT_VEL = 2
_TAG_PSO_STEP = 3
_TAG_DE_STEP = 4
_TAG_SHIFT = 5
_TAG_SOURCE = 6
_TAG_BOUNDARY = 7
_TAG_DE_INIT = 8


def _mix64(x: int) -> int:
    # splitmix64 finalizer: a well-mixed 64-bit permutation.
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _stream_base(seed: int, *keys: int) -> int:
    base = _mix64(seed & MASK64)
    for key in keys:
        base = _mix64(base ^ (key & MASK64))
    return base


def unit(seed: int, *keys: int) -> float:
    """One uniform draw in [0, 1), a pure function of its keys."""
    return (_stream_base(seed, *keys) >> 11) * 2.0**-53


def unit_stream(seed: int, *keys: int):
    """Endless uniform draws in [0, 1) for a fixed key tuple."""
    base = _stream_base(seed, *keys)
    counter = 0
    while True:
        yield (_mix64(base ^ counter) >> 11) * 2.0**-53
        counter += 1


def pack_doubles(values) -> bytes:
    return struct.pack("<%dd" % len(values), *values)


def unpack_doubles(data: bytes) -> list[float]:
    return list(struct.unpack("<%dd" % (len(data) // 8), data))


def partition(count: int, workers: int, worker: int) -> range:
    """Contiguous share of range(count) owned by one worker."""
    return range(count * worker // workers, count * (worker + 1) // workers)


@dataclass(frozen=True)
class AppSpec:
    name: str
    dimension: int
    population_or_grid: int
    seed: int

    def __post_init__(self):
        if self.name not in APP_NAMES:
            raise ValueError("unknown app %r" % self.name)
        if self.dimension <= 0 or self.population_or_grid <= 0:
            raise ValueError("dimension and population_or_grid must be positive")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 bits")


def _sphere(x, shift) -> float:
    total = 0.0
    for xi, si in zip(x, shift):
        d = xi - si
        total += d * d
    return total


class ParticleSwarm:
    """Swarm minimization of a seed-shifted sphere objective.

    The only global state is the best value and position found so far;
    each worker owns a sub-swarm (positions, velocities, personal bests)
    as local state, which is therefore essential for exact recovery.
    """

    INERTIA = 0.7
    COGNITIVE = 1.4
    SOCIAL = 1.4
    SPAN = 5.0

    def __init__(self, spec: AppSpec, workers: int):
        self.spec = spec
        self.workers = workers
        self.dim = spec.dimension
        self.shift = [
            4.0 * unit(spec.seed, _TAG_SHIFT, d) - 2.0 for d in range(self.dim)
        ]

    def init_global(self) -> dict[str, bytes]:
        return {"best": pack_doubles([math.inf] + [0.0] * self.dim)}

    def init_local(self, worker: int) -> dict[str, bytes]:
        seed, dim = self.spec.seed, self.dim
        particles = partition(self.spec.population_or_grid, self.workers, worker)
        pos, vel, pbest = [], [], []
        for p in particles:
            x = [
                self.SPAN * (2.0 * unit(seed, _TAG_INIT_POS, p, d) - 1.0)
                for d in range(dim)
            ]
            v = [
                0.5 * (2.0 * unit(seed, _TAG_INIT_VEL, p, d) - 1.0)
                for d in range(dim)
            ]
            pos.extend(x)
            vel.extend(v)
            pbest.extend(x + [_sphere(x, self.shift)])
        return {
            "swarm/%d" % worker: pack_doubles(pos + vel + pbest),
        }

    def _split_local(self, blob: bytes, count: int):
        values = unpack_doubles(blob)
        dim = self.dim
        pos = values[: count * dim]
        vel = values[count * dim : 2 * count * dim]
        rest = values[2 * count * dim :]
        pbest_pos, pbest_val = [], []
        for p in range(count):
            chunk = rest[p * (dim + 1) : (p + 1) * (dim + 1)]
            pbest_pos.append(chunk[:dim])
            pbest_val.append(chunk[dim])
        return pos, vel, pbest_pos, pbest_val

    def superstep(
        self,
        worker: int,
        index: int,
        global_map: dict[str, bytes],
        local_map: dict[str, bytes],
    ) -> tuple[dict[str, bytes], bytes]:
        spec, dim = self.spec, self.dim
        particles = partition(spec.population_or_grid, self.workers, worker)
        count = len(particles)
        best = unpack_doubles(global_map["best"])
        gbest_pos = best[1:]
        pos, vel, pbest_pos, pbest_val = self._split_local(
            local_map["swarm/%d" % worker], count
        )
        draws = unit_stream(spec.seed, _TAG_PSO_STEP, worker, index)
        for p in range(count):
            base = p * dim
            for d in range(dim):
                r1 = next(draws)
                r2 = next(draws)
                v = (
                    self.INERTIA * vel[base + d]
                    + self.COGNITIVE * r1 * (pbest_pos[p][d] - pos[base + d])
                    + self.SOCIAL * r2 * (gbest_pos[d] - pos[base + d])
                )
                v = max(-2.0, min(2.0, v))
                vel[base + d] = v
                pos[base + d] = pos[base + d] + v
            value = _sphere(pos[base : base + dim], self.shift)
            if value < pbest_val[p]:
                pbest_val[p] = value
                pbest_pos[p] = pos[base : base + dim]

        best_p = min(range(count), key=lambda p: pbest_val[p]) if count else None
        if best_p is None:
            contribution = pack_doubles([math.inf] + [0.0] * dim)
        else:
            contribution = pack_doubles([pbest_val[best_p]] + pbest_pos[best_p])
        flat_pbest = []
        for p in range(count):
            flat_pbest.extend(pbest_pos[p])
            flat_pbest.append(pbest_val[p])
        new_local = {
            "swarm/%d" % worker: pack_doubles(pos + vel + flat_pbest)
        }
        return new_local, contribution

    def reduce(
        self, global_map: dict[str, bytes], contributions: list[bytes]
    ) -> dict[str, bytes]:
        best = unpack_doubles(global_map["best"])
        for blob in contributions:  # worker id order: first strict win stays
            candidate = unpack_doubles(blob)
            if candidate[0] < best[0]:
                best = candidate
        return {"best": pack_doubles(best)}


class DifferentialEvolution:
    """DE/rand/1/bin minimization of the same shifted-sphere objective.

    The entire population and its fitness are global state; workers own
    index slices and propose replacements.  Local state is a per-worker
    success counter, diagnostic only.
    """

    F = 0.5
    CR = 0.9
    SPAN = 5.0

    def __init__(self, spec: AppSpec, workers: int):
        self.spec = spec
        self.workers = workers
        self.dim = spec.dimension
        self.np = spec.population_or_grid
        if self.np < 4:
            raise ValueError(
                "DifferentialEvolution needs a population of at least 4"
            )
        self.shift = [
            4.0 * unit(spec.seed, _TAG_SHIFT, d) - 2.0 for d in range(self.dim)
        ]

    def init_global(self) -> dict[str, bytes]:
        seed, dim = self.spec.seed, self.dim
        pop, fitness = [], []
        for i in range(self.np):
            x = [
                self.SPAN * (2.0 * unit(seed, _TAG_DE_INIT, i, d) - 1.0)
                for d in range(dim)
            ]
            pop.extend(x)
            fitness.append(_sphere(x, self.shift))
        return {"fitness": pack_doubles(fitness), "pop": pack_doubles(pop)}

    def init_local(self, worker: int) -> dict[str, bytes]:
        return {"wins/%d" % worker: struct.pack("<Q", 0)}

    def superstep(
        self,
        worker: int,
        index: int,
        global_map: dict[str, bytes],
        local_map: dict[str, bytes],
    ) -> tuple[dict[str, bytes], bytes]:
        spec, dim, np_ = self.spec, self.dim, self.np
        pop = unpack_doubles(global_map["pop"])
        fitness = unpack_doubles(global_map["fitness"])
        owned = partition(np_, self.workers, worker)
        (wins,) = struct.unpack("<Q", local_map["wins/%d" % worker])

        rows, new_fit = [], []
        for i in owned:
            draws = unit_stream(spec.seed, _TAG_DE_STEP, index, i)
            picked = [i]
            while len(picked) < 4:
                r = int(next(draws) * np_)
                if r not in picked:
                    picked.append(r)
            _, r1, r2, r3 = picked
            j_rand = int(next(draws) * dim)
            trial = []
            for d in range(dim):
                if next(draws) < self.CR or d == j_rand:
                    trial.append(
                        pop[r1 * dim + d]
                        + self.F * (pop[r2 * dim + d] - pop[r3 * dim + d])
                    )
                else:
                    trial.append(pop[i * dim + d])
            value = _sphere(trial, self.shift)
            if value <= fitness[i]:
                rows.extend(trial)
                new_fit.append(value)
                wins += 1
            else:
                rows.extend(pop[i * dim : (i + 1) * dim])
                new_fit.append(fitness[i])

        contribution = struct.pack("<II", owned.start, len(owned)) + pack_doubles(
            rows + new_fit
        )
        new_local = {"wins/%d" % worker: struct.pack("<Q", wins)}
        return new_local, contribution

    def reduce(
        self, global_map: dict[str, bytes], contributions: list[bytes]
    ) -> dict[str, bytes]:
        pop = unpack_doubles(global_map["pop"])
        fitness = unpack_doubles(global_map["fitness"])
        dim = self.dim
        for blob in contributions:
            start, count = struct.unpack_from("<II", blob, 0)
            values = unpack_doubles(blob[8:])
            rows, new_fit = values[: count * dim], values[count * dim :]
            pop[start * dim : (start + count) * dim] = rows
            fitness[start : start + count] = new_fit
        return {"fitness": pack_doubles(fitness), "pop": pack_doubles(pop)}


class JacobiSolver:
    """Jacobi relaxation of independent 1-D Poisson problems.

    One grid column per dimension component, fixed seed-derived boundary
    values and source terms.  The grid is global; workers own interior
    row slices.  Local state is a residual accumulator, diagnostic only.
    """

    def __init__(self, spec: AppSpec, workers: int):
        self.spec = spec
        self.workers = workers
        self.dim = spec.dimension
        self.n = spec.population_or_grid
        if self.n < 3:
            raise ValueError("JacobiSolver needs a grid of at least 3 points")
        seed = spec.seed
        self.source = [
            2.0 * unit(seed, _TAG_SOURCE, i, d) - 1.0
            for i in range(self.n)
            for d in range(self.dim)
        ]
        self.top = [unit(seed, _TAG_BOUNDARY, 0, d) for d in range(self.dim)]
        self.bottom = [unit(seed, _TAG_BOUNDARY, 1, d) for d in range(self.dim)]

    def init_global(self) -> dict[str, bytes]:
        dim = self.dim
        grid = [0.0] * (self.n * dim)
        for d in range(dim):
            grid[d] = self.top[d]
            grid[(self.n - 1) * dim + d] = self.bottom[d]
        return {"grid": pack_doubles(grid)}

    def init_local(self, worker: int) -> dict[str, bytes]:
        return {"resid/%d" % worker: pack_doubles([0.0])}

    def _interior(self, worker: int) -> range:
        # Interior rows 1..n-2 split among workers.
        share = partition(self.n - 2, self.workers, worker)
        return range(share.start + 1, share.stop + 1)

    def superstep(
        self,
        worker: int,
        index: int,
        global_map: dict[str, bytes],
        local_map: dict[str, bytes],
    ) -> tuple[dict[str, bytes], bytes]:
        dim = self.dim
        grid = unpack_doubles(global_map["grid"])
        rows = self._interior(worker)
        h2 = 1.0 / ((self.n - 1) * (self.n - 1))
        out = []
        residual = unpack_doubles(local_map["resid/%d" % worker])[0]
        for i in rows:
            for d in range(dim):
                new = 0.5 * (
                    grid[(i - 1) * dim + d]
                    + grid[(i + 1) * dim + d]
                    + h2 * self.source[i * dim + d]
                )
                residual += abs(new - grid[i * dim + d])
                out.append(new)
        contribution = struct.pack("<II", rows.start, len(rows)) + pack_doubles(out)
        new_local = {"resid/%d" % worker: pack_doubles([residual])}
        return new_local, contribution

    def reduce(
        self, global_map: dict[str, bytes], contributions: list[bytes]
    ) -> dict[str, bytes]:
        grid = unpack_doubles(global_map["grid"])
        dim = self.dim
        for blob in contributions:
            start, count = struct.unpack_from("<II", blob, 0)
            values = unpack_doubles(blob[8:])
            grid[start * dim : (start + count) * dim] = values
        return {"grid": pack_doubles(grid)}


def make_app(spec: AppSpec, workers: int):
    if workers <= 0:
        raise ValueError("workers must be positive")
    cls = {
        APP_PARTICLE_SWARM: ParticleSwarm,
        APP_DIFFERENTIAL_EVOLUTION: DifferentialEvolution,
        APP_JACOBI_SOLVER: JacobiSolver,
    }[spec.name]
    return cls(spec, workers)


def local_state_essential(name: str) -> bool:
    """Whether exact recovery requires restoring local segments."""
    return name == APP_PARTICLE_SWARM
