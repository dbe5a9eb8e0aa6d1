"""The toroidal lattice and the per-tick scheduler.

Phase order within a tick: weather, depletion accounting, sense, evaluate,
learn, emit, death, reproduction, migration. Evaluation happens before the
new forward cycle so the standing prediction is always judged against data
it could not have seen. All failure modes here are ecological, not
exceptional: a unit that mismanages its energy simply dissolves.

Emissions are stored as the list of last-tick emitters; the per-cell signal
field is a derived view materialized on demand. Both encodings produce the
same attenuated reads.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field

import numpy as np

from .evolution import MutationRates, mutate_all, recombine
from .genome import Genome, new_uniform_genome
from .neural import CycleOutput, NetState, forward_cycle, fresh_state
from .physics import EnergyLedgerEntry, PhysicsParams, compression_ratio, energy_update
from .plasticity import hebbian_update
from .rngs import (
    TAG_FOUNDER_GENOME,
    TAG_FOUNDER_PLACE,
    TAG_MIGRATE,
    TAG_REPRODUCE,
    substream,
    unit_choice,
    unit_uniform,
)
from .serialize import stable_hash
from .streams import INTENSITY_FLOOR, StreamKind, StreamSet, WeatherState, scale_continuous

EMISSION_SOURCE = "emission"

# 8-neighborhood in deterministic scan order.
NEIGHBOR_OFFSETS = tuple(
    (dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if not (dy == 0 and dx == 0)
)


def toroidal_chebyshev(ax: int, ay: int, bx: int, by: int, width: int, height: int) -> int:
    dx = abs(ax - bx)
    dx = min(dx, width - dx)
    dy = abs(ay - by)
    dy = min(dy, height - dy)
    return max(dx, dy)


def attenuate(amplitude: float, d: int, r_a: int) -> float:
    """Inverse-square falloff; beyond the attenuation radius nothing arrives.

    The emitter's own cell is not a receiver, so d >= 1 always.
    """
    if d < 1:
        raise ValueError("attenuation distance must be >= 1")
    if d > r_a:
        return 0.0
    return amplitude / (d * d)


def allocate_depletion(offered: float, claimants: int, v_max: float) -> float:
    """Per-claimant volume share of one cell: min(offered, v_max) split equally."""
    if claimants <= 0 or offered <= 0:
        return 0.0
    return min(offered, v_max) / claimants


@dataclass(frozen=True)
class WorldConfig:
    width: int = 48
    height: int = 48
    founder_count: int = 320
    r_s: int = 1
    r_a: int = 4
    master_seed: int = 0
    emission_slots: int = 4
    founder_node_count: int = 6
    founder_steps: int = 1
    founder_move_prob: float = 0.3
    node_min: int = 5
    node_max: int = 50
    sigma_init: float = 0.15
    intensity_floor: float = INTENSITY_FLOOR
    profile_window: int = 500
    strict_blind_deletion: bool = False
    # Volume weight of an active emission channel relative to one full
    # stream channel. Keeps raw streams the primary energy source; emission
    # feeding is a niche, not a perpetual-motion loop.
    signal_volume_scale: float = 0.15
    # Minimum attenuated signal sum for an emission channel to count as
    # carrying data. Faint ambient signal neither scores nor earns, exactly
    # like stream intensity below the intensity floor.
    signal_floor: float = 0.25

    def __post_init__(self) -> None:
        if self.r_s < 1 or self.r_a < 1:
            raise ValueError("perception and attenuation radii must be >= 1")
        span = 2 * max(self.r_s, self.r_a) + 1
        if self.width < span or self.height < span:
            raise ValueError(f"lattice must be at least {span} cells across for these radii")
        if self.founder_count > self.width * self.height:
            raise ValueError("more founders than lattice cells")


class _SensorCache:
    """Per-interface derived indices; rebuilt only when the interface mutates."""

    __slots__ = (
        "interface",
        "adm_idx",
        "adm_rel",
        "admits_kind",
        "admits_every_kind",
        "sig_admits",
        "any_sig",
    )

    def __init__(self, interface, configs, stream_width: int, emission_slots: int) -> None:
        self.interface = interface
        mask = interface.receptor_mask
        self.adm_idx = []
        self.adm_rel = []
        admits = []
        for cfg in configs:
            idx = np.array([c for c in range(cfg.start, cfg.stop) if mask[c]], dtype=np.int64)
            self.adm_idx.append(idx)
            self.adm_rel.append(idx - cfg.start)
            admits.append(len(idx) > 0)
        self.admits_kind = admits
        self.admits_every_kind = all(admits)
        self.sig_admits = np.array(
            [bool(mask[stream_width + e]) if stream_width + e < len(mask) else False
             for e in range(emission_slots)]
        )
        self.any_sig = bool(self.sig_admits.any())


@dataclass
class Unit:
    """A live organism: genome, carried network state, energy, position."""

    uid: int
    genome: Genome
    state: NetState
    energy: float
    x: int
    y: int
    birth_tick: int
    parents: tuple[int, ...] = ()
    last_cycle: CycleOutput | None = None
    corrupt_ticks: int = 0
    # Rolling sensed-volume window by source bucket, for the live telemetry.
    window: collections.deque = field(default_factory=collections.deque)
    window_sums: dict = field(default_factory=dict)
    sensor_cache: _SensorCache | None = None

    def push_window(self, volumes: dict, maxlen: int) -> None:
        self.window.append(volumes)
        for k, v in volumes.items():
            self.window_sums[k] = self.window_sums.get(k, 0.0) + v
        while len(self.window) > maxlen:
            old = self.window.popleft()
            for k, v in old.items():
                self.window_sums[k] -= v


@dataclass(frozen=True, slots=True)
class UnitTickRecord:
    """Everything the ledger knows about one unit's tick."""

    tick: int
    unit_id: int
    e_before: float
    gain: float
    compute_cost: float
    maintenance: float
    e_after: float
    surplus: float
    v_in: int
    v_volume: float
    v_repr: int
    error: float
    corrupt: bool
    sources: tuple[tuple[str, float], ...]
    volumes: tuple[tuple[str, float], ...]

    def ledger_entry(self) -> EnergyLedgerEntry:
        return EnergyLedgerEntry(
            tick=self.tick,
            unit_id=self.unit_id,
            gain=self.gain,
            compute_cost=self.compute_cost,
            maintenance=self.maintenance,
            sources=self.sources,
        )


@dataclass(frozen=True)
class TickReport:
    tick: int
    population: int
    births: int
    deaths: int
    total_gain: float
    total_compute: float
    total_maintenance: float
    mean_energy: float
    mean_error_by_kind: dict
    noise_fraction: float
    gain_by_source: dict
    birth_events: tuple = ()
    death_events: tuple = ()
    records: tuple = ()
    corrupt_units: int = 0
    text_wrapped: bool = False


class World:
    """Full simulation state plus the step scheduler."""

    def __init__(
        self,
        cfg: WorldConfig,
        physics: PhysicsParams,
        rates: MutationRates,
        stream_set: StreamSet,
        weather: WeatherState,
    ) -> None:
        self.cfg = cfg
        self.physics = physics
        self.rates = rates
        self.streams = stream_set
        self.weather = weather
        self.stream_width = stream_set.width
        self.sensory_width = stream_set.width + cfg.emission_slots
        self.tick = 0
        self.next_unit_id = 0
        self.units: dict[int, Unit] = {}
        self.occupancy = np.full((cfg.height, cfg.width), -1, dtype=np.int64)
        # Emissions deposited at t-1, readable this tick: (uid, x, y, vector).
        self.emitters: list[tuple[int, int, int, np.ndarray]] = []
        self.text_wrap_logged = False

        disc = np.zeros(self.sensory_width, dtype=bool)
        disc[: self.stream_width] = stream_set.discrete_mask()
        self.discrete_mask = disc
        self.configs = stream_set.configs
        self.n_kinds = len(self.configs)
        self.kind_names = [cfg_.kind.value for cfg_ in self.configs]
        self.kind_widths = np.array([cfg_.width for cfg_ in self.configs], dtype=np.float64)
        self.kind_discrete = [cfg_.discrete for cfg_ in self.configs]
        # Channel -> kind index (signal channels get index n_kinds).
        ck = np.full(self.sensory_width, self.n_kinds, dtype=np.int64)
        for i, cfg_ in enumerate(self.configs):
            ck[cfg_.start : cfg_.stop] = i
        self.chan_kind = ck
        self.bucket_names = self.kind_names + [EMISSION_SOURCE]

        # Modular window index tables for the perception radius; the 2-D row
        # selectors are prebuilt so the hot loop never calls np.ix_.
        self._row_win_s = self._window_table(cfg.height, cfg.r_s)
        self._col_win_s = self._window_table(cfg.width, cfg.r_s)
        self._row_sel = [self._row_win_s[y][:, None] for y in range(cfg.height)]
        self._col_sel = [self._col_win_s[x][None, :] for x in range(cfg.width)]

        # Reusable per-unit buffers (consumed within one unit's phases).
        w_total = self.sensory_width
        self._buf_values = np.zeros(w_total)
        self._buf_scored = np.zeros(w_total, dtype=bool)
        self._buf_volumes = np.zeros(w_total)
        self._buf_errs = np.zeros(w_total)
        self._uid_labels: dict[int, str] = {}

    @staticmethod
    def _window_table(size: int, radius: int) -> np.ndarray:
        offsets = np.arange(-radius, radius + 1)
        return (np.arange(size)[:, None] + offsets[None, :]) % size

    # -- construction -------------------------------------------------------

    @staticmethod
    def create(
        cfg: WorldConfig,
        physics: PhysicsParams,
        rates: MutationRates,
        stream_set: StreamSet,
        weather: WeatherState,
    ) -> "World":
        world = World(cfg, physics, rates, stream_set, weather)
        place_rng = substream(cfg.master_seed, TAG_FOUNDER_PLACE)
        cells = place_rng.permutation(cfg.width * cfg.height)[: cfg.founder_count]
        for i, cell in enumerate(sorted(cells.tolist())):
            y, x = divmod(cell, cfg.width)
            genome = new_uniform_genome(
                cfg.founder_node_count,
                substream(cfg.master_seed, TAG_FOUNDER_GENOME, i),
                sensory_width=world.sensory_width,
                emission_slots=cfg.emission_slots,
                sigma_init=cfg.sigma_init,
                propagation_steps=cfg.founder_steps,
                move_prob=cfg.founder_move_prob,
            )
            world._spawn(genome, x, y, physics.e_start, birth_tick=0, parents=())
        return world

    def _spawn(self, genome: Genome, x: int, y: int, energy: float, birth_tick: int, parents: tuple) -> Unit:
        uid = self.next_unit_id
        self.next_unit_id += 1
        unit = Unit(
            uid=uid,
            genome=genome,
            state=fresh_state(genome, self.sensory_width),
            energy=energy,
            x=x,
            y=y,
            birth_tick=birth_tick,
            parents=parents,
        )
        self.units[uid] = unit
        self.occupancy[y, x] = uid
        return unit

    def _cache(self, u: Unit) -> _SensorCache:
        cache = u.sensor_cache
        if cache is None or cache.interface is not u.genome.interface:
            cache = _SensorCache(
                u.genome.interface, self.configs, self.stream_width, self.cfg.emission_slots
            )
            u.sensor_cache = cache
        return cache

    # -- per-tick fields -------------------------------------------------------

    def _boxsum(self, grid: np.ndarray, radius: int) -> np.ndarray:
        out = np.zeros_like(grid)
        tmp = np.zeros_like(grid)
        for k in range(-radius, radius + 1):
            tmp += np.roll(grid, k, axis=0)
        for k in range(-radius, radius + 1):
            out += np.roll(tmp, k, axis=1)
        return out

    def _depletion_fields(self, intensity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Offered volume and per-claimant per-channel share fraction."""
        floor = self.cfg.intensity_floor
        present = intensity >= floor
        offered = (present * self.kind_widths[:, None, None]).sum(axis=0)
        any_present = present.any(axis=0)

        full_grid = np.zeros((self.cfg.height, self.cfg.width))
        partial_units = []
        for uid in sorted(self.units):
            u = self.units[uid]
            cache = self._cache(u)
            if cache.admits_every_kind:
                full_grid[u.y, u.x] += 1.0
            else:
                partial_units.append((u, cache))
        claims = self._boxsum(full_grid, self.cfg.r_s) * any_present
        for u, cache in partial_units:
            rsel = self._row_sel[u.y]
            csel = self._col_sel[u.x]
            window_any = np.zeros((rsel.shape[0], csel.shape[1]), dtype=bool)
            for k in range(self.n_kinds):
                if cache.admits_kind[k]:
                    window_any |= present[k][rsel, csel]
            claims[rsel, csel] += window_any

        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(
                (offered > 0) & (claims > 0),
                np.minimum(offered, self.physics.v_max)
                / (np.maximum(claims, 1.0) * np.maximum(offered, 1.0)),
                0.0,
            )
        return offered, share

    # -- the scheduler ----------------------------------------------------------

    def step(self) -> TickReport:
        cfg = self.cfg
        p = self.physics
        tick = self.tick
        floor = cfg.intensity_floor
        n_kinds = self.n_kinds
        W_s = self.stream_width

        # Phase 1: weather.
        self.weather.advance()
        intensity = np.stack(
            [self.weather.intensity_field(c.kind) for c in self.configs], axis=0
        )
        base = [self.streams.base_window(c, tick, cfg.master_seed) for c in self.configs]

        text_wrapped = False
        if not self.text_wrap_logged and self.streams.config_for(StreamKind.TEXT) is not None:
            if self.streams.text_wrapped(tick):
                self.text_wrap_logged = True
                text_wrapped = True

        # Phase 2: depletion accounting.
        _offered, share = self._depletion_fields(intensity)

        # Last tick's emitters, as arrays for vectorized distance scans.
        emitters = self.emitters
        if emitters:
            em_x = np.array([e[1] for e in emitters], dtype=np.int64)
            em_y = np.array([e[2] for e in emitters], dtype=np.int64)
            em_mat = np.stack([e[3] for e in emitters], axis=0)
            em_uid = [e[0] for e in emitters]

        # Phases 3-6, per unit in ascending id order.
        next_emitters: list[tuple[int, int, int, np.ndarray]] = []
        records: list[UnitTickRecord] = []
        kind_err_sum = np.zeros(n_kinds + 1)
        kind_err_cnt = np.zeros(n_kinds + 1, dtype=np.int64)
        gain_by_source: dict[str, float] = {}
        total_gain = total_compute = 0.0
        corrupt_units = 0

        values = self._buf_values
        scored = self._buf_scored
        volumes = self._buf_volumes
        errs = self._buf_errs
        not_discrete = ~self.discrete_mask

        for uid in sorted(self.units):
            u = self.units[uid]
            cache = self._cache(u)
            rsel = self._row_sel[u.y]
            csel = self._col_sel[u.x]

            values.fill(0.0)
            scored.fill(False)
            volumes.fill(0.0)
            vol_bucket: dict[str, float] = {}
            stream_sources: list[tuple[str, float]] = []

            # Phase 3: sense streams from the strongest claimed cell per kind.
            # Intensity is data density: it scales both the effective input
            # width and the consumed volume; the depletion share divides the
            # volume only.
            v_in_eff = 0.0
            iw_all = intensity[:, rsel, csel]
            sw = share[rsel, csel]
            for k in range(n_kinds):
                if not cache.admits_kind[k]:
                    continue
                iw = iw_all[k]
                if iw.max() < floor:
                    continue
                score = np.where(iw >= floor, iw * sw, 0.0)
                flat = int(np.argmax(score))
                if score.flat[flat] <= 0.0:
                    continue
                i_best = float(iw.flat[flat])
                f_best = float(sw.flat[flat])
                adm = cache.adm_idx[k]
                raw = base[k][cache.adm_rel[k]]
                if not self.kind_discrete[k]:
                    raw = scale_continuous(raw, i_best)
                values[adm] = raw
                scored[adm] = True
                volumes[adm] = i_best * f_best
                v_in_eff += i_best * len(adm)
                kind_vol = i_best * f_best * len(adm)
                name = self.kind_names[k]
                vol_bucket[name] = kind_vol
                stream_sources.append((name, kind_vol))

            # Signals from last tick's emitters, attenuated by distance.
            emitter_contrib = None
            if emitters and cache.any_sig:
                dx = np.abs(em_x - u.x)
                np.minimum(dx, cfg.width - dx, out=dx)
                dy = np.abs(em_y - u.y)
                np.minimum(dy, cfg.height - dy, out=dy)
                d = np.maximum(dx, dy)
                sel = (d >= 1) & (d <= cfg.r_a)
                if sel.any():
                    att = 1.0 / (d[sel].astype(np.float64) ** 2)
                    em_sel = em_mat[sel]
                    sig = att @ em_sel
                    active = (sig >= cfg.signal_floor) & cache.sig_admits
                    if active.any():
                        idx = W_s + np.nonzero(active)[0]
                        normalized = sig[active] / (1.0 + sig[active])
                        values[idx] = normalized
                        scored[idx] = True
                        sig_vol = normalized * cfg.signal_volume_scale
                        volumes[idx] = sig_vol
                        v_in_eff += float(sig_vol.sum())
                        vol_bucket[EMISSION_SOURCE] = float(sig_vol.sum())
                        emitter_contrib = (
                            np.nonzero(sel)[0],
                            att * em_sel[:, active].sum(axis=1),
                            float(sig_vol.sum()),
                        )

            # Phase 4: evaluate the standing prediction against what arrived.
            pred = u.state.last_prediction
            errs.fill(0.0)
            cont = scored & not_discrete
            disc = scored & self.discrete_mask
            if cont.any():
                dvec = values[cont] - pred[cont]
                errs[cont] = dvec * dvec
            if disc.any():
                b = values[disc]
                q = pred[disc]
                errs[disc] = -(b * np.log(q) + (1.0 - b) * np.log(1.0 - q))
            n_scored = int(np.count_nonzero(scored))
            error = float(errs[scored].sum() / n_scored) if n_scored else 0.0
            if n_scored:
                sc_idx = self.chan_kind[scored]
                np.add.at(kind_err_sum, sc_idx, errs[scored])
                np.add.at(kind_err_cnt, sc_idx, 1)

            v_repr = u.last_cycle.v_repr if u.last_cycle else 0
            k_cost = u.last_cycle.k_cost if u.last_cycle else 0.0
            was_corrupt = bool(u.last_cycle.corrupt) if u.last_cycle else False
            c_ratio = compression_ratio(v_in_eff, v_repr, error)
            v_volume = float(volumes[scored].sum()) if n_scored else 0.0
            gain = p.alpha * c_ratio * v_volume
            compute = p.beta * k_cost
            e_before = u.energy
            e_after, surplus = energy_update(e_before, c_ratio, v_volume, k_cost, p)
            u.energy = e_after

            # Provenance: gain is attributed by sensed volume per source.
            # The emission bucket's volume is split across emitters by their
            # amplitude contribution; emitters under one part in a thousand
            # are folded away to keep the ledger compact.
            sources: tuple[tuple[str, float], ...] = ()
            if gain > 0.0:
                mag_pairs = list(stream_sources)
                if emitter_contrib is not None:
                    sel_ids, contrib, sig_vol_total = emitter_contrib
                    amp_total = float(contrib.sum())
                    if amp_total > 0.0:
                        labels = self._uid_labels
                        amp_floor = 1e-3 * amp_total
                        for local_i, c in zip(sel_ids, contrib):
                            if c > amp_floor:
                                e_uid = em_uid[local_i]
                                label = labels.get(e_uid)
                                if label is None:
                                    label = labels[e_uid] = f"unit:{e_uid}"
                                mag_pairs.append((label, sig_vol_total * float(c) / amp_total))
                mag_total = sum(m for _, m in mag_pairs)
                if mag_total > 0.0:
                    sources = tuple(sorted((name, m / mag_total) for name, m in mag_pairs))
                for name, sh in sources:
                    bucket = EMISSION_SOURCE if name.startswith("unit:") else name
                    gain_by_source[bucket] = gain_by_source.get(bucket, 0.0) + gain * sh

            u.push_window(vol_bucket, cfg.profile_window)
            records.append(
                UnitTickRecord(
                    tick=tick,
                    unit_id=uid,
                    e_before=e_before,
                    gain=gain,
                    compute_cost=compute,
                    maintenance=p.gamma,
                    e_after=e_after,
                    surplus=surplus,
                    v_in=n_scored,
                    v_volume=v_volume,
                    v_repr=v_repr,
                    error=error,
                    corrupt=was_corrupt,
                    sources=sources,
                    volumes=tuple(sorted(vol_bucket.items())),
                )
            )
            total_gain += gain
            total_compute += compute

            # Phase 5: plasticity, gated by this tick's surplus.
            u.genome, resets = hebbian_update(u.genome, u.state, surplus, p)
            if resets:
                u.corrupt_ticks += resets

            # Phase 6: forward cycle; emissions become next tick's signals.
            u.state, cycle = forward_cycle(
                u.genome,
                u.state,
                values,
                tau=p.tau,
                discrete_mask=self.discrete_mask,
                emission_slots=cfg.emission_slots,
            )
            u.last_cycle = cycle
            if cycle.corrupt:
                u.corrupt_ticks += 1
                corrupt_units += 1
            if cycle.emission.any():
                next_emitters.append((uid, u.x, u.y, cycle.emission))

        total_maintenance = p.gamma * len(records)

        # Phase 7: death.
        death_events = []
        for uid in sorted(self.units):
            u = self.units[uid]
            if u.energy <= 0.0:
                death_events.append(
                    {"tick": tick, "unit": uid, "energy": u.energy, "age": tick - u.birth_tick}
                )
                self.occupancy[u.y, u.x] = -1
                del self.units[uid]

        # Phase 8: reproduction in ascending id order.
        birth_events = self._phase_reproduce(tick)

        # Phase 9: migration.
        self._phase_migrate(tick)

        self.emitters = next_emitters
        self.tick = tick + 1

        pop = len(self.units)
        mean_energy = (
            float(sum(u.energy for u in self.units.values()) / pop) if pop else 0.0
        )
        mean_error_by_kind = {}
        for i, name in enumerate(self.bucket_names):
            if kind_err_cnt[i]:
                mean_error_by_kind[name] = float(kind_err_sum[i] / kind_err_cnt[i])
        return TickReport(
            tick=tick,
            population=pop,
            births=len(birth_events),
            deaths=len(death_events),
            total_gain=total_gain,
            total_compute=total_compute,
            total_maintenance=total_maintenance,
            mean_energy=mean_energy,
            mean_error_by_kind=mean_error_by_kind,
            noise_fraction=self.noise_fraction(),
            gain_by_source=gain_by_source,
            birth_events=tuple(birth_events),
            death_events=tuple(death_events),
            records=tuple(records),
            corrupt_units=corrupt_units,
            text_wrapped=text_wrapped,
        )

    def signal_field(self) -> np.ndarray:
        """Materialize the per-cell signal view of the current emitter set."""
        cfg = self.cfg
        out = np.zeros((cfg.height, cfg.width, cfg.emission_slots))
        ys = np.arange(cfg.height)[:, None]
        xs = np.arange(cfg.width)[None, :]
        for _uid, ex, ey, emission in self.emitters:
            dx = np.abs(xs - ex)
            dx = np.minimum(dx, cfg.width - dx)
            dy = np.abs(ys - ey)
            dy = np.minimum(dy, cfg.height - dy)
            d = np.maximum(dx, dy)
            with np.errstate(divide="ignore"):
                att = np.where((d >= 1) & (d <= cfg.r_a), 1.0 / (d * d), 0.0)
            out += att[:, :, None] * emission[None, None, :]
        return out

    def _empty_neighbors(self, x: int, y: int) -> list[tuple[int, int]]:
        out = []
        for dy, dx in NEIGHBOR_OFFSETS:
            ny = (y + dy) % self.cfg.height
            nx = (x + dx) % self.cfg.width
            if self.occupancy[ny, nx] < 0:
                out.append((nx, ny))
        return out

    def _adjacent_units(self, x: int, y: int) -> list[int]:
        out = []
        for dy, dx in NEIGHBOR_OFFSETS:
            ny = (y + dy) % self.cfg.height
            nx = (x + dx) % self.cfg.width
            uid = self.occupancy[ny, nx]
            if uid >= 0:
                out.append(int(uid))
        return out

    def _phase_reproduce(self, tick: int) -> list[dict]:
        births = []
        threshold = self.physics.repro_threshold
        candidates = [uid for uid in sorted(self.units) if self.units[uid].energy > threshold]
        for uid in candidates:
            parent = self.units.get(uid)
            if parent is None or not parent.energy > threshold:
                continue
            empties = self._empty_neighbors(parent.x, parent.y)
            if not empties:
                continue  # deferred, no state change
            rng = substream(self.cfg.master_seed, TAG_REPRODUCE, tick, uid)
            nx, ny = empties[int(rng.integers(len(empties)))]

            partner_id: int | None = None
            eligible = [
                a
                for a in self._adjacent_units(parent.x, parent.y)
                if self.units[a].energy > threshold
            ]
            if eligible and rng.random() < self.rates.recomb_prob:
                partner_id = min(eligible)

            kw = dict(
                sensory_width=self.sensory_width,
                emission_slots=self.cfg.emission_slots,
                node_max=self.cfg.node_max,
                strict_blind_deletion=self.cfg.strict_blind_deletion,
            )
            if partner_id is not None:
                child_genome = recombine(
                    parent.genome, self.units[partner_id].genome, self.rates, rng, **kw
                )
            else:
                child_genome = mutate_all(parent.genome, self.rates, rng, **kw)
            if __debug__:
                from .genome import validate_genome

                validate_genome(child_genome, self.cfg.node_min, self.cfg.node_max)

            half = parent.energy * 0.5
            parent.energy = half
            child = self._spawn(
                child_genome,
                nx,
                ny,
                half,
                birth_tick=tick,
                parents=(uid,) if partner_id is None else (uid, partner_id),
            )
            births.append(
                {
                    "tick": tick,
                    "child": child.uid,
                    "parents": list(child.parents),
                    "genome_hash": stable_hash(child_genome.to_json_dict()),
                    "pos": [nx, ny],
                }
            )
        return births

    def _phase_migrate(self, tick: int) -> None:
        seed = self.cfg.master_seed
        for uid in sorted(self.units):
            u = self.units[uid]
            move_prob = u.genome.params.move_prob
            if move_prob <= 0.0:
                continue
            if unit_uniform(seed, TAG_MIGRATE, tick, uid) >= move_prob:
                continue
            empties = self._empty_neighbors(u.x, u.y)
            if not empties:
                continue
            nx, ny = empties[unit_choice(len(empties), seed, TAG_MIGRATE, tick, uid, 1)]
            self.occupancy[u.y, u.x] = -1
            self.occupancy[ny, nx] = uid
            u.x, u.y = nx, ny

    # -- telemetry ------------------------------------------------------------

    def noise_fraction(self) -> float:
        """Fraction of units admitting noise whose windowed noise volume
        exceeds a quarter of their total sensed volume."""
        if not self.units:
            return 0.0
        noise_cfg = self.streams.config_for(StreamKind.NOISE)
        if noise_cfg is None:
            return 0.0
        noise_name = StreamKind.NOISE.value
        qualifying = 0
        for u in self.units.values():
            cache = self._cache(u)
            k = next(i for i, c in enumerate(self.configs) if c.kind is StreamKind.NOISE)
            if not cache.admits_kind[k]:
                continue
            total = sum(u.window_sums.values())
            noise = u.window_sums.get(noise_name, 0.0)
            if total > 0.0 and noise > 0.25 * total:
                qualifying += 1
        return qualifying / len(self.units)

    # -- state serialization ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "tick": self.tick,
            "next_unit_id": self.next_unit_id,
            "text_wrap_logged": self.text_wrap_logged,
            "weather": self.weather.to_json_dict(),
            "emitters": [
                [int(uid), int(x), int(y), [float(v) for v in emission]]
                for uid, x, y, emission in self.emitters
            ],
            "units": [
                {
                    "uid": u.uid,
                    "x": u.x,
                    "y": u.y,
                    "energy": u.energy,
                    "birth_tick": u.birth_tick,
                    "parents": list(u.parents),
                    "corrupt_ticks": u.corrupt_ticks,
                    "genome": u.genome.to_json_dict(),
                    "activations": u.state.activations.tolist(),
                    "last_prediction": u.state.last_prediction.tolist(),
                    "last_cycle": (
                        None
                        if u.last_cycle is None
                        else {
                            "v_repr": u.last_cycle.v_repr,
                            "k_cost": u.last_cycle.k_cost,
                            "corrupt": u.last_cycle.corrupt,
                        }
                    ),
                }
                for uid, u in sorted(self.units.items())
            ],
        }

    def state_hash(self) -> str:
        return stable_hash(self.state_dict())

    def load_state(self, data: dict) -> None:
        self.tick = int(data["tick"])
        self.next_unit_id = int(data["next_unit_id"])
        self.text_wrap_logged = bool(data["text_wrap_logged"])
        self.weather = WeatherState.from_json_dict(data["weather"])
        self.emitters = [
            (int(uid), int(x), int(y), np.asarray(emission, dtype=np.float64))
            for uid, x, y, emission in data["emitters"]
        ]
        self.units = {}
        self.occupancy = np.full((self.cfg.height, self.cfg.width), -1, dtype=np.int64)
        for ud in data["units"]:
            genome = Genome.from_json_dict(ud["genome"])
            unit = Unit(
                uid=int(ud["uid"]),
                genome=genome,
                state=NetState(
                    activations=np.asarray(ud["activations"], dtype=np.float64),
                    last_prediction=np.asarray(ud["last_prediction"], dtype=np.float64),
                ),
                energy=float(ud["energy"]),
                x=int(ud["x"]),
                y=int(ud["y"]),
                birth_tick=int(ud["birth_tick"]),
                parents=tuple(ud["parents"]),
                corrupt_ticks=int(ud["corrupt_ticks"]),
            )
            lc = ud["last_cycle"]
            if lc is not None:
                unit.last_cycle = CycleOutput(
                    prediction_next=unit.state.last_prediction.copy(),
                    emission=np.zeros(self.cfg.emission_slots),
                    v_repr=int(lc["v_repr"]),
                    k_cost=float(lc["k_cost"]),
                    corrupt=bool(lc["corrupt"]),
                )
            self.units[unit.uid] = unit
            self.occupancy[unit.y, unit.x] = unit.uid
