"""Deterministic discrete-event simulator for the DoS and location-spoofing
scenarios: UEs, a queue-and-worker server, radio propagation, and attack
drivers. One seeded run is bit-reproducible.

Servers are a queue-and-worker abstraction: workers serve requests in
parallel, arrivals queue when all workers are busy, and arrivals that find
the queue at capacity are dropped. Service times come from a calibration
table (measured by the benchmark harness or the shipped defaults anchored
to reference timings), so queue dynamics are host-independent.

Scenario behaviors
  baseline      protections disabled; attackers flood cheap requests open
                loop; every request costs the server full handling.
  full_protocol attackers run the whole protocol per request including the
                sequential puzzle, which throttles their arrival rate;
                repeats within a window are rejected via tag linking.
  bypass        attackers skip the client-side work and fire synchronized
                request pulses; the server rejects them cheaply after
                verification but they occupy queue slots until dequeued.
  precompute    attackers bank solved puzzles (bounded by the validity
                window over the eval time) and drain the bank during the
                attack window.
"""
from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass

from .errors import ParameterError
from .protocol import RadioEnv, prox_verify

C_LIGHT = 299_792_458.0

DOS_SCENARIOS = ("baseline", "full_protocol", "bypass", "precompute")


# -- calibration --------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    """Per-request service times and client-side costs, in seconds."""
    baseline_service_s: float = 0.024     # unprotected request handling
    query_verify_s: float = 0.0743        # credential + proof + record + puzzle
    service_verify_s: float = 0.0777      # credential + puzzle sig + VDF verify
    reject_service_s: float = 0.006       # malformed request, fast reject
    link_reject_s: float = 0.048          # verified then refused via tag link
    client_crypto_s: float = 0.105        # client-side proofs per full run
    vdf_s_per_squaring: float = 1.21e-5   # sequential squaring rate
    backhaul_rtt_s: float = 0.004         # AP <-> server round trip

    def vdf_eval_s(self, kappa: int) -> float:
        return kappa * self.vdf_s_per_squaring

    @classmethod
    def from_file(cls, path: str) -> "Calibration":
        with open(path) as f:
            data = json.load(f)
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_file(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump({k: getattr(self, k) for k in self.__dataclass_fields__},
                      f, indent=2, sort_keys=True)


DEFAULT_CALIBRATION = Calibration()


# -- configuration and metrics ------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    n_ue: int = 100
    r_mal: float = 0.2
    duration_s: float = 10.0
    attack_start_s: float = 2.0
    attack_end_s: float = 8.0
    seed: int = 1
    workers: int = 8
    queue_capacity: int = 100
    benign_kappa: int = 10 ** 3
    attacker_kappa: int = 3 * 10 ** 5     # escalated difficulty for repeat abusers
    baseline_attack_rate_hz: float = 100.0
    bypass_rate_hz: float = 11.6
    precompute_kappa: int = 2 * 10 ** 4
    precompute_submit_hz: float = 0.8
    validity_s: float = 60.0

    def __post_init__(self):
        if self.scenario not in DOS_SCENARIOS:
            raise ParameterError(f"unknown scenario: {self.scenario}")
        if not 0.0 <= self.r_mal <= 1.0:
            raise ParameterError("r_mal must be in [0, 1]")
        if not (0 <= self.attack_start_s <= self.attack_end_s <= self.duration_s):
            raise ParameterError("attack window must lie inside the run")
        if self.n_ue < 1 or self.workers < 1 or self.queue_capacity < 1:
            raise ParameterError("degenerate scenario size")

    @property
    def n_malicious(self) -> int:
        return int(self.n_ue * self.r_mal)

    @property
    def n_benign(self) -> int:
        return self.n_ue - self.n_malicious


@dataclass
class SimMetrics:
    scenario: str
    n_ue: int
    r_mal: float
    seed: int
    n_generated: int = 0
    n_queued: int = 0
    n_dropped_benign: int = 0
    n_dropped_malicious: int = 0
    n_rejected_arrival: int = 0
    n_served: int = 0
    n_immediate: int = 0
    t_q_ms: float = 0.0
    max_queue_len: int = 0
    attack_success_rate: float = 0.0
    max_precomputed_bank: int = 0

    CSV_HEADER = ("scenario,n_ue,r_mal,seed,n_generated,n_queued,"
                  "n_dropped_benign,n_dropped_malicious,n_rejected_arrival,"
                  "n_served,n_immediate,t_q_ms,max_queue_len,"
                  "attack_success_rate,max_precomputed_bank")

    def csv_row(self) -> str:
        return (f"{self.scenario},{self.n_ue},{self.r_mal:.2f},{self.seed},"
                f"{self.n_generated},{self.n_queued},{self.n_dropped_benign},"
                f"{self.n_dropped_malicious},{self.n_rejected_arrival},"
                f"{self.n_served},{self.n_immediate},{self.t_q_ms:.3f},"
                f"{self.max_queue_len},{self.attack_success_rate:.6f},"
                f"{self.max_precomputed_bank}")

    def conserved(self) -> bool:
        return self.n_generated == (self.n_queued + self.n_immediate
                                    + self.n_dropped_benign
                                    + self.n_dropped_malicious
                                    + self.n_rejected_arrival)


# -- event engine ---------------------------------------------------------------

class SimClock:
    """Monotone event loop; equal-time events run in insertion order."""

    def __init__(self):
        self._heap: list[tuple[int, int, object]] = []
        self._seq = 0
        self.now_ns = 0

    def schedule(self, delay_s: float, fn) -> None:
        at = self.now_ns + max(0, int(round(delay_s * 1e9)))
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, fn))

    def run_until(self, t_end_s: float) -> None:
        end_ns = int(t_end_s * 1e9)
        while self._heap and self._heap[0][0] <= end_ns:
            at, _, fn = heapq.heappop(self._heap)
            if at < self.now_ns:
                raise AssertionError("time went backwards")
            self.now_ns = at
            fn()

    @property
    def now_s(self) -> float:
        return self.now_ns / 1e9


@dataclass
class Request:
    ue_id: int
    malicious: bool
    service_s: float
    enqueued_ns: int = 0
    done_cb: object = None
    retries_left: int = 0      # benign requests ride a retrying transport
    retry_backoff_s: float = 0.08
    granted: bool = True       # protocol-valid request (vs rejected on verify)


class ServerModel:
    """Bounded FIFO queue feeding parallel workers; overflow drops arrivals.

    Benign requests model a reliable transport: an arrival rejected at a
    momentarily full queue is retransmitted after a backoff and only counts
    as a benign drop once its retries are exhausted (sustained overload).
    Malicious flooders fire and forget; every rejected attempt is a drop.
    """

    def __init__(self, clock: SimClock, workers: int, capacity: int,
                 metrics: SimMetrics):
        self.clock = clock
        self.workers = workers
        self.capacity = capacity
        self.metrics = metrics
        self.busy = 0
        self.queue: list[Request] = []
        self._wait_sum_ns = 0
        self._wait_count = 0
        self._mal_generated = 0
        self._mal_granted = 0

    def offer(self, req: Request) -> None:
        self.metrics.n_generated += 1
        if req.malicious:
            self._mal_generated += 1
        if self.busy < self.workers and not self.queue:
            self.metrics.n_immediate += 1
            self._begin(req)
        elif len(self.queue) < self.capacity:
            req.enqueued_ns = self.clock.now_ns
            self.queue.append(req)
            self.metrics.n_queued += 1
            self.metrics.max_queue_len = max(self.metrics.max_queue_len,
                                             len(self.queue))
        elif req.malicious:
            self.metrics.n_dropped_malicious += 1
        elif req.retries_left > 0:
            self.metrics.n_rejected_arrival += 1
            req.retries_left -= 1
            self.clock.schedule(req.retry_backoff_s,
                                lambda r=req: self.offer(r))
        else:
            self.metrics.n_dropped_benign += 1

    def _begin(self, req: Request) -> None:
        self.busy += 1
        self.clock.schedule(req.service_s, lambda r=req: self._complete(r))

    def _complete(self, req: Request) -> None:
        self.busy -= 1
        self.metrics.n_served += 1
        if req.malicious and req.granted:
            self._mal_granted += 1
        if req.done_cb is not None:
            req.done_cb()
        if self.queue and self.busy < self.workers:
            nxt = self.queue.pop(0)
            self._wait_sum_ns += self.clock.now_ns - nxt.enqueued_ns
            self._wait_count += 1
            self._begin(nxt)

    def mean_wait_ms(self) -> float:
        if self._wait_count == 0:
            return 0.0
        return self._wait_sum_ns / self._wait_count / 1e6

    def malicious_success_rate(self) -> float:
        if self._mal_generated == 0:
            return 0.0
        return self._mal_granted / self._mal_generated


# -- DoS scenarios ----------------------------------------------------------------

def run_dos(cfg: ScenarioConfig,
            calibration: Calibration = DEFAULT_CALIBRATION) -> SimMetrics:
    clock = SimClock()
    metrics = SimMetrics(cfg.scenario, cfg.n_ue, cfg.r_mal, cfg.seed)
    server = ServerModel(clock, cfg.workers, cfg.queue_capacity, metrics)
    rng = random.Random(cfg.seed)
    cal = calibration

    # benign UEs: one full run each, starts stratified over the run with
    # seeded jitter so per-interval load is stable across the grid
    n_b = cfg.n_benign
    usable = cfg.duration_s - 1.5
    for i in range(n_b):
        spacing = usable / max(n_b, 1)
        start = 0.3 + i * spacing + rng.uniform(-0.2, 0.2) * spacing
        start = min(max(start, 0.05), usable)
        clock.schedule(start, _benign_run(clock, server, cfg, cal, ue_id=i))

    # attackers per scenario
    if cfg.scenario == "baseline":
        _spawn_baseline_attackers(clock, server, cfg, cal, rng)
    elif cfg.scenario == "full_protocol":
        _spawn_full_attackers(clock, server, cfg, cal, rng)
    elif cfg.scenario == "bypass":
        _spawn_bypass_attackers(clock, server, cfg, cal)
    elif cfg.scenario == "precompute":
        _spawn_precompute_attackers(clock, server, cfg, cal, metrics)

    clock.run_until(cfg.duration_s)
    metrics.t_q_ms = server.mean_wait_ms()
    metrics.attack_success_rate = server.malicious_success_rate()
    return metrics


def _benign_run(clock: SimClock, server: ServerModel, cfg: ScenarioConfig,
                cal: Calibration, ue_id: int):
    """Benign flow: spectrum query, local puzzle evaluation, service request."""
    protected = cfg.scenario != "baseline"

    def start():
        prep = cal.client_crypto_s if protected else 0.005
        clock.schedule(prep + cal.backhaul_rtt_s / 2, send_query)

    def send_query():
        svc = cal.query_verify_s if protected else cal.baseline_service_s
        server.offer(Request(ue_id, False, svc, done_cb=query_done,
                             retries_left=3))

    def query_done():
        gap = (cal.vdf_eval_s(cfg.benign_kappa) + cal.backhaul_rtt_s
               if protected else 0.01)
        clock.schedule(gap, send_service)

    def send_service():
        svc = cal.service_verify_s if protected else cal.baseline_service_s
        server.offer(Request(ue_id, False, svc, retries_left=3))

    return start


def _spawn_baseline_attackers(clock, server, cfg, cal, rng):
    period = 1.0 / cfg.baseline_attack_rate_hz
    for i in range(cfg.n_malicious):
        offset = rng.uniform(0, period)

        def loop(i=i):
            def fire():
                if clock.now_s >= cfg.attack_end_s:
                    return
                server.offer(Request(10_000 + i, True, cal.baseline_service_s))
                clock.schedule(period, fire)
            return fire
        clock.schedule(cfg.attack_start_s + offset - clock.now_s, loop())


def _spawn_full_attackers(clock, server, cfg, cal, rng):
    """Closed loop: every request is preceded by the full client-side cost
    including the sequential puzzle at the attacker's difficulty."""
    cycle_gap = cal.client_crypto_s + cal.vdf_eval_s(cfg.attacker_kappa)

    for i in range(cfg.n_malicious):
        state = {"first": True}

        def loop(i=i, state=state):
            def compute_then_send():
                if clock.now_s >= cfg.attack_end_s:
                    return
                clock.schedule(cycle_gap + cal.backhaul_rtt_s, send)

            def send():
                if clock.now_s >= cfg.attack_end_s:
                    return
                # first request in the window verifies fully; repeats are
                # refused after the tag-link scan
                svc = cal.query_verify_s if state["first"] else cal.link_reject_s
                server.offer(Request(20_000 + i, True, svc,
                                     done_cb=compute_then_send,
                                     granted=state["first"]))
                state["first"] = False
            return send
        # attackers are mid-protocol when the window opens: uniform phase
        phase = rng.uniform(0, cycle_gap)
        clock.schedule(cfg.attack_start_s + phase, loop())


def _spawn_bypass_attackers(clock, server, cfg, cal):
    """Synchronized open-loop pulses of proof-less requests; the server
    rejects each after a cheap verification."""
    period = 1.0 / cfg.bypass_rate_hz
    n = cfg.n_malicious

    def pulse():
        if clock.now_s >= cfg.attack_end_s:
            return
        for i in range(n):
            server.offer(Request(30_000 + i, True, cal.reject_service_s,
                                 granted=False))
        clock.schedule(period, pulse)

    clock.schedule(cfg.attack_start_s, pulse)


def _spawn_precompute_attackers(clock, server, cfg, cal, metrics):
    """Attackers solve puzzles continuously from t=0, banking unexpired
    solutions, and drain the bank at a fixed pace during the window."""
    t_eval = cal.vdf_eval_s(cfg.precompute_kappa)
    bank_bound = precompute_limit(cfg.precompute_kappa, cfg.validity_s,
                                  cal.vdf_s_per_squaring)
    submit_period = 1.0 / cfg.precompute_submit_hz

    for i in range(cfg.n_malicious):
        state = {"bank": [], "first": True}  # bank holds expiry stamps

        def solver(state=state):
            def solved():
                now = clock.now_s
                state["bank"] = [e for e in state["bank"] if e > now]
                state["bank"].append(now + cfg.validity_s)
                if len(state["bank"]) > bank_bound:
                    raise AssertionError(
                        "precompute bank exceeded the validity bound")
                metrics.max_precomputed_bank = max(metrics.max_precomputed_bank,
                                                   len(state["bank"]))
                if now + t_eval < cfg.duration_s:
                    clock.schedule(t_eval, solved)
            return solved

        def submitter(i=i, state=state):
            def submit():
                now = clock.now_s
                if now >= cfg.attack_end_s:
                    return
                state["bank"] = [e for e in state["bank"] if e > now]
                if state["bank"]:
                    state["bank"].pop(0)
                    svc = (cal.service_verify_s if state["first"]
                           else cal.link_reject_s)
                    server.offer(Request(40_000 + i, True, svc,
                                         granted=state["first"]))
                    state["first"] = False
                clock.schedule(submit_period, submit)
            return submit

        clock.schedule(t_eval, solver())
        clock.schedule(cfg.attack_start_s + (i % 10) * submit_period / 10,
                       submitter())


def precompute_limit(kappa: int, validity_s: float,
                     eval_rate_s_per_squaring: float) -> int:
    """Most unexpired puzzles a solver can hold: floor(validity / t_eval)."""
    if validity_s <= 0:
        return 0
    t_eval = kappa * eval_rate_s_per_squaring
    if t_eval <= 0:
        raise ParameterError("evaluation rate must be positive")
    return int(validity_s / t_eval + 1e-9)  # guard the floor against float dust


# -- distance fraud ----------------------------------------------------------------

@dataclass(frozen=True)
class FraudRound:
    informed: bool     # response sent after seeing the challenge
    rtt_ns: float
    correct: bool


def fraud_session(rounds: int, distance_m: float, threshold_m: float,
                  guess_prob: float, tolerance: float,
                  rng: random.Random) -> tuple[bool, list[FraudRound]]:
    """One distance-fraud session with per-round provenance.

    The clock model pins informed responses to the true round trip (the
    attacker cannot undercut light speed); pre-sent guesses arrive in time
    but are only correct with probability g + (1-g)/2.
    """
    floor_ns = 2.0 * distance_m / C_LIGHT * 1e9
    bound_ns = 2.0 * threshold_m / C_LIGHT * 1e9
    q = guess_prob + (1.0 - guess_prob) / 2.0
    allowed = int(tolerance * rounds)
    failures = 0
    transcript = []
    for _ in range(rounds):
        if floor_ns <= bound_ns:
            transcript.append(FraudRound(True, floor_ns, True))
            continue
        correct = rng.random() < q
        transcript.append(FraudRound(False, bound_ns * 0.9, correct))
        if not correct:
            failures += 1
    return failures <= allowed, transcript


def run_fraud(rounds: int, tolerance: float, guess_prob: float, trials: int,
              seed: int = 1) -> float:
    """Monte Carlo acceptance rate for an early-responding prover beyond the
    distance bound: each pre-sent response is correct with probability
    g + (1-g)/2."""
    if not 0.0 <= guess_prob <= 1.0:
        raise ParameterError("guess probability must be in [0, 1]")
    if not 0.0 <= tolerance < 1.0:
        raise ParameterError("tolerance must be in [0, 1)")
    allowed = int(tolerance * rounds)
    q = guess_prob + (1.0 - guess_prob) / 2.0
    rnd = random.Random(seed).random
    successes = 0
    for _ in range(trials):
        failures = 0
        for _ in range(rounds):
            if rnd() >= q:
                failures += 1
                if failures > allowed:
                    break
        if failures <= allowed:
            successes += 1
    return successes / trials


def run_fraud_grid(rounds_grid=(20, 50, 100), tol_grid=(0.0, 0.1, 0.2),
                   guess_grid=(0.5, 0.7, 0.9), trials: int = 10 ** 5,
                   seed: int = 1) -> list[dict]:
    out = []
    for n in rounds_grid:
        for tol in tol_grid:
            for g in guess_grid:
                rate = run_fraud(n, tol, g, trials,
                                 seed=seed ^ (n << 16) ^ int(tol * 100) << 8
                                     ^ int(g * 100))
                out.append({"rounds": n, "tolerance": tol, "guess": g,
                            "trials": trials, "success_rate": rate})
    return out


# -- distance hijacking --------------------------------------------------------------

_TIE_EPS_M = 1e-6  # float guard at exact-threshold grid points


def run_hijack_cell(honest_d: float, mal_d: float, weight: float,
                    trials: int, rng: random.Random,
                    env: RadioEnv, threshold_m: float = 50.0,
                    noiseless: bool = False,
                    shadowing_db: list[float] | None = None) -> float:
    """Relay attack: RSS observed from the honest relay's distance, RTT from
    the full relayed path (the clock model cannot be undercut). Shadowing
    draws may be supplied so sweeps pair trials across cells."""
    successes = 0
    rtt_s = 2.0 * mal_d / C_LIGHT
    for t in range(trials):
        rss = env.rss_at(honest_d)
        if not noiseless:
            rss += (shadowing_db[t] if shadowing_db is not None
                    else rng.gauss(0.0, env.shadowing_sigma_db))
        est = prox_verify(rss, rtt_s, env, weight)
        if est.d_hat <= threshold_m + _TIE_EPS_M:
            successes += 1
    return successes / trials


def run_hijack(honest_grid=tuple(range(0, 51, 10)),
               mal_grid=tuple(range(50, 101, 10)),
               weight_grid=tuple(round(0.1 * i, 1) for i in range(1, 10)),
               trials: int = 100, seed: int = 1,
               noiseless: bool = False,
               env: RadioEnv | None = None) -> list[dict]:
    """Success-rate sweep with one shadowing draw per trial index, shared
    across the whole grid (paired design: monotonicity in the sweep axes is
    not washed out by per-cell sampling noise)."""
    env = env or RadioEnv(shadowing_sigma_db=0.0 if noiseless else 3.0)
    rng = random.Random(seed)
    draws = [rng.gauss(0.0, env.shadowing_sigma_db) for _ in range(trials)]
    out = []
    for hd in honest_grid:
        for md in mal_grid:
            for w in weight_grid:
                rate = run_hijack_cell(float(hd), float(md), w, trials, rng,
                                       env, noiseless=noiseless,
                                       shadowing_db=draws)
                out.append({"honest_d": hd, "mal_d": md, "weight": w,
                            "trials": trials, "success_rate": rate})
    return out


def hijack_threshold_indicator(honest_d: float, mal_d: float, weight: float,
                               threshold_m: float = 50.0) -> int:
    """Closed-form noiseless success: w*d_path + (1-w)*honest_d <= threshold."""
    return int(weight * mal_d + (1.0 - weight) * honest_d
               <= threshold_m + _TIE_EPS_M)


# -- sweep helper ---------------------------------------------------------------------

def dos_grid(scenario: str, n_ue_grid=(50, 100, 150, 200, 250),
             r_mal_grid=(0.2, 0.3, 0.4), seed: int = 1,
             calibration: Calibration = DEFAULT_CALIBRATION,
             **overrides) -> list[SimMetrics]:
    out = []
    for n_ue in n_ue_grid:
        for r_mal in r_mal_grid:
            cfg = ScenarioConfig(scenario=scenario, n_ue=n_ue, r_mal=r_mal,
                                 seed=seed, **overrides)
            out.append(run_dos(cfg, calibration))
    return out
