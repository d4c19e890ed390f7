"""Command-line entry point: key management, protocol role execution,
simulations, benchmarks, and fragmentation analysis.

Every protocol reject reason maps to its own exit code (EXIT_CODES);
`SLAPX_SEED` overrides the RNG seed for any subcommand. Simulation output
is stable-schema CSV (optionally a JSON summary) so repeated seeded runs
are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import socket
import sys
import threading

from . import bench as bench_mod
from . import simnet, wire
from .errors import ProtocolReject, RejectReason
from .protocol import (Deployment, DeviceProfile, NeighborDevice, SeededRng,
                       run_pol_ap, run_pol_nd, run_service_request,
                       run_spectrum_query)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CODES = {reason: 64 + i for i, reason in enumerate(RejectReason)}


def _seed_from_env(default: int) -> int:
    env = os.environ.get("SLAPX_SEED")
    return int(env) if env else default


def _load_config(path: str | None) -> dict:
    """Flat key = value scenario file; '#' starts a comment."""
    if not path:
        return {}
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


# -- deployment reconstruction ------------------------------------------------

def _deployment(args) -> Deployment:
    seed = _seed_from_env(getattr(args, "seed", 1))
    return Deployment.create(seed=seed,
                             psd_modulus_bits=getattr(args, "modulus_bits", 2048))


def _client_for(dep: Deployment, args):
    profile = DeviceProfile(
        device_id=getattr(args, "device_id", "DEV-0001").encode()[:8].ljust(8, b"\x00"),
        tx_power_dbm=30.0,
        device_class=getattr(args, "device_class", 0))
    return dep.new_client(profile, seed=_seed_from_env(getattr(args, "seed", 1)) + 1000)


# -- subcommands ----------------------------------------------------------------

def cmd_keygen(args) -> int:
    dep = _deployment(args)
    info = {"seed": _seed_from_env(args.seed),
            "ring": dep.view.ring,
            "dac_fingerprint": dep.view.dac_params.fingerprint().hex(),
            "psd_pk": dep.psd.sgn_key.pk.to_bytes().hex()}
    text = json.dumps(info, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_enroll(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    from .dac import encode_credential
    blob = encode_credential(client.cred, dep.view.dac_params)
    print(json.dumps({"device_id": args.device_id,
                      "credential_bytes": len(blob),
                      "credential": blob.hex()}, indent=2))
    return EXIT_OK


def _run_protocol_once(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    now = 120.0
    l_x, l_y = args.x, args.y

    proof, tr1 = run_pol_ap(client, dep.ap, l_x, l_y, now)
    if args.expired:
        now += 61.0  # proof now belongs to the previous window
    if args.replay:
        run_spectrum_query(client, dep.psd, l_x, l_y, now, proof=proof)
    record, puzzle, sig, tr2 = run_spectrum_query(client, dep.psd, l_x, l_y,
                                                  now, proof=proof)
    token, sol, tr3 = run_service_request(client, dep.server, b"usage-report",
                                          puzzle, now, proof=proof)
    print(f"GRANTED token={token.hex()}")
    print(f"phase_bytes pol_ap={tr1.total_payload} "
          f"spectrum_query={tr2.total_payload} "
          f"service_request={tr3.total_payload}")
    print(f"channels={len(record.channels)} kappa={puzzle.tau}")
    return EXIT_OK


def cmd_pol(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    if args.via == "nd":
        nd_pk, nd_sk, nd_cred = dep.authority.enroll(
            DeviceProfile(b"ND-00001", 30.0, 0), delegable=True)
        nd = NeighborDevice(dep.view, nd_sk, nd_cred,
                            SeededRng(_seed_from_env(args.seed) + 7))
        dcred, tr = run_pol_nd(client, nd, args.x, args.y, 120.0,
                               true_distance_m=args.distance)
        print(f"POL_ND_OK phase_bytes={tr.total_payload}")
    else:
        proof, tr = run_pol_ap(client, dep.ap, args.x, args.y, 120.0,
                               true_distance_m=args.distance or None)
        print(f"POL_AP_OK phase_bytes={tr.total_payload} window={proof.window}")
    return EXIT_OK


def cmd_query(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    now = 120.0
    proof, _ = run_pol_ap(client, dep.ap, args.x, args.y, now)
    record, puzzle, _, tr = run_spectrum_query(client, dep.psd, args.x, args.y,
                                               now, proof=proof)
    print(f"QUERY_OK phase_bytes={tr.total_payload} "
          f"channels={len(record.channels)} kappa={puzzle.tau}")
    return EXIT_OK


def cmd_service(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    now = 120.0
    proof, _ = run_pol_ap(client, dep.ap, args.x, args.y, now)
    record, puzzle, _, _ = run_spectrum_query(client, dep.psd, args.x, args.y,
                                              now, proof=proof)
    token, sol, tr = run_service_request(client, dep.server, b"svc", puzzle,
                                         now, proof=proof)
    print(f"SERVICE_OK phase_bytes={tr.total_payload} token={token.hex()}")
    return EXIT_OK


def cmd_protocol(args) -> int:
    if args.transport == "socket":
        return _run_protocol_socket(args)
    return _run_protocol_once(args)


# -- socket transport (demo) ------------------------------------------------------

def _serve_role(handler, now_s: float):
    """One-shot listener: accept framed requests, answer framed responses."""
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.bind(("127.0.0.1", 0))
    srv.listen(4)
    port = srv.getsockname()[1]

    def loop():
        while True:
            try:
                conn, _ = srv.accept()
            except OSError:
                return
            with conn:
                data = b""
                while len(data) < wire.HEADER_LEN or \
                        len(data) < wire.HEADER_LEN + int.from_bytes(data[1:5], "big"):
                    chunk = conn.recv(65536)
                    if not chunk:
                        break
                    data += chunk
                msg, _ = wire.decode_message(data)
                reply = handler(msg, now_s)
                conn.sendall(reply.encode())

    t = threading.Thread(target=loop, daemon=True)
    t.start()
    return srv, port


def _socket_call(port: int, msg: wire.WireMessage) -> wire.WireMessage:
    with socket.create_connection(("127.0.0.1", port)) as conn:
        conn.sendall(msg.encode())
        data = b""
        while len(data) < wire.HEADER_LEN or \
                len(data) < wire.HEADER_LEN + int.from_bytes(data[1:5], "big"):
            chunk = conn.recv(65536)
            if not chunk:
                break
            data += chunk
    reply, _ = wire.decode_message(data)
    return reply


def _run_protocol_socket(args) -> int:
    dep = _deployment(args)
    client = _client_for(dep, args)
    now = 120.0

    def ap_handler(msg, now_s):
        content = wire.message_content(msg)
        out = dep.ap.issue_pol(content, now_s, true_distance_m=args.distance or 22.4)
        return wire.build_message("pol_ap_response", out)

    def psd_handler(msg, now_s):
        out = dep.psd.handle_spectrum_request(wire.message_content(msg), now_s)
        return wire.build_message("spectrum_response", out)

    def server_handler(msg, now_s):
        out = dep.server.handle_service_request(wire.message_content(msg), now_s)
        return wire.build_message("service_response", out)

    servers = [_serve_role(h, now) for h in (ap_handler, psd_handler, server_handler)]
    try:
        from . import dac
        from .protocol import LocationProof, presentation_context

        # PoL over the socket
        window = int(now // 60)
        beacon = dep.ap.beacon(now)
        nym, aux = client.fresh_nym()
        loc = dac.Attribute.location(args.x, args.y).value
        win_b = window.to_bytes(8, "big")
        ctx = presentation_context("pol-ap", window, dep.ap.ap_id)
        pres = dac.dac_cred_prove(dep.view.dac_params, client.sk, nym, aux,
                                  client.cred, (), ctx, client.rng,
                                  payload=beacon.encode() + loc + win_b)
        req = wire.build_message("pol_ap_request", wire.pack_fields(
            beacon.encode(), loc, win_b, pres.to_bytes(dep.view.dac_params)))
        resp = _socket_call(servers[0][1], req)
        proof = LocationProof.decode(wire.message_content(resp), dep.view.rlrs_params)

        record, puzzle, sig, tr2 = run_spectrum_query(
            client, _PsdProxy(dep, servers[1][1]), args.x, args.y, now, proof=proof)
        token, sol, tr3 = run_service_request(
            client, _ServerProxy(dep, servers[2][1]), b"usage-report", puzzle,
            now, proof=proof)
        total_pol = len(req.payload) + len(resp.payload)
        print(f"GRANTED token={token.hex()}")
        print(f"phase_bytes pol_ap={total_pol} "
              f"spectrum_query={tr2.total_payload} "
              f"service_request={tr3.total_payload}")
        return EXIT_OK
    finally:
        for srv, _ in servers:
            srv.close()


class _PsdProxy:
    def __init__(self, dep, port):
        self._port = port

    def handle_spectrum_request(self, content: bytes, now_s: float) -> bytes:
        reply = _socket_call(self._port, wire.build_message("spectrum_request",
                                                            content))
        return wire.message_content(reply)


class _ServerProxy:
    def __init__(self, dep, port):
        self._port = port

    def handle_service_request(self, content: bytes, now_s: float) -> bytes:
        reply = _socket_call(self._port, wire.build_message("service_request",
                                                            content))
        return wire.message_content(reply)


# -- simulations -------------------------------------------------------------------

_SCENARIO_ALIASES = {"full": "full_protocol", "full_protocol": "full_protocol",
                     "baseline": "baseline", "bypass": "bypass",
                     "precompute": "precompute"}


def cmd_simulate(args) -> int:
    conf = _load_config(args.config)
    seed = _seed_from_env(int(conf.get("seed", args.seed)))
    if args.what == "dos":
        scen = _SCENARIO_ALIASES.get(conf.get("scenario", args.scenario))
        if scen is None:
            print(f"unknown scenario: {args.scenario}", file=sys.stderr)
            return EXIT_USAGE
        cal = (simnet.Calibration.from_file(args.calibration)
               if args.calibration else simnet.DEFAULT_CALIBRATION)
        rows = []
        if args.sweep:
            rows = simnet.dos_grid(scen, seed=seed, calibration=cal)
        else:
            cfg = simnet.ScenarioConfig(
                scenario=scen, n_ue=int(conf.get("n_ue", args.n_ue)),
                r_mal=float(conf.get("r_mal", args.r_mal)), seed=seed)
            rows = [simnet.run_dos(cfg, cal)]
        out = [simnet.SimMetrics.CSV_HEADER] + [m.csv_row() for m in rows]
        _emit(args, "\n".join(out) + "\n",
              {"rows": [m.__dict__ for m in rows]})
        return EXIT_OK

    if args.attack == "fraud":
        if args.grid:
            rows = simnet.run_fraud_grid(trials=args.trials, seed=seed)
        else:
            rate = simnet.run_fraud(args.rounds, args.tolerance, args.guess,
                                    args.trials, seed=seed)
            rows = [{"rounds": args.rounds, "tolerance": args.tolerance,
                     "guess": args.guess, "trials": args.trials,
                     "success_rate": rate}]
        header = "rounds,tolerance,guess,trials,success_rate"
        body = [f"{r['rounds']},{r['tolerance']:.2f},{r['guess']:.2f},"
                f"{r['trials']},{r['success_rate']:.6f}" for r in rows]
    else:  # hijack
        rows = simnet.run_hijack(trials=args.trials, seed=seed,
                                 noiseless=args.noiseless)
        header = "honest_d,mal_d,weight,trials,success_rate"
        body = [f"{r['honest_d']},{r['mal_d']},{r['weight']:.1f},"
                f"{r['trials']},{r['success_rate']:.6f}" for r in rows]
    _emit(args, header + "\n" + "\n".join(body) + "\n", {"rows": rows})
    return EXIT_OK


def _emit(args, csv_text: str, summary: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    else:
        print(csv_text, end="")
    if getattr(args, "output", None):
        with open(args.output, "w") as f:
            f.write(csv_text)


def cmd_bench(args) -> int:
    report = bench_mod.bench_all(iterations=args.iterations,
                                 kappa_grid=tuple(args.kappa),
                                 vdf_modulus_bits=args.modulus_bits)
    if args.csv:
        print(report.csv(), end="")
    else:
        print(report.table())
    if args.calibrate:
        bench_mod.calibrate(report, tuple(args.kappa)).to_file(args.calibrate)
        print(f"calibration written to {args.calibrate}")
    return EXIT_OK


def cmd_fragmentation(args) -> int:
    if args.mtu:
        mtus = [args.mtu]
    else:
        mtus = sorted({args.mtu_min, 1500, 3000, 6000, args.mtu_max}
                      | set(range(args.mtu_min, args.mtu_max + 1, args.step)))
        mtus = [m for m in mtus if args.mtu_min <= m <= args.mtu_max]
    print("mtu,message,payload_bytes,header_bytes,packets,overhead_ratio")
    for mtu in mtus:
        for e in wire.fragmentation_report(mtu, args.header_bytes):
            print(f"{mtu},{e.message},{e.payload_bytes},{e.header_bytes},"
                  f"{e.packets},{e.overhead_ratio:.6f}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slapx",
                                description="privacy-preserving spectrum "
                                            "sharing protocol toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--modulus-bits", type=int, default=2048,
                        dest="modulus_bits")
        sp.add_argument("--device-id", default="DEV-0001")
        sp.add_argument("--device-class", type=int, default=0)
        sp.add_argument("-x", type=float, default=10.0)
        sp.add_argument("-y", type=float, default=20.0)
        sp.add_argument("--distance", type=float, default=0.0)

    sp = sub.add_parser("keygen", help="provision authority, ring, and PSD keys")
    common(sp)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_keygen)

    sp = sub.add_parser("enroll", help="issue a device credential")
    common(sp)
    sp.set_defaults(fn=cmd_enroll)

    sp = sub.add_parser("pol", help="acquire a proof of location")
    common(sp)
    sp.add_argument("--via", choices=["ap", "nd"], default="ap")
    sp.set_defaults(fn=cmd_pol)

    sp = sub.add_parser("query", help="run PoL + spectrum query")
    common(sp)
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("service", help="run the full pipeline once")
    common(sp)
    sp.set_defaults(fn=cmd_service)

    sp = sub.add_parser("protocol", help="end-to-end demo with byte accounting")
    common(sp)
    sp.add_argument("--transport", choices=["in-process", "socket"],
                    default="in-process")
    sp.add_argument("--replay", action="store_true",
                    help="replay the proof within the window (expect LINKED)")
    sp.add_argument("--expired", action="store_true",
                    help="use the proof after its window (expect EXPIRED)")
    sp.set_defaults(fn=cmd_protocol)

    sp = sub.add_parser("simulate", help="run DoS or spoofing simulations")
    sp.add_argument("what", choices=["dos", "spoof"])
    sp.add_argument("--scenario", default="full",
                    help="dos: baseline|full|bypass|precompute")
    sp.add_argument("--attack", choices=["fraud", "hijack"], default="fraud")
    sp.add_argument("--n-ue", type=int, default=100, dest="n_ue")
    sp.add_argument("--r-mal", type=float, default=0.2, dest="r_mal")
    sp.add_argument("--rounds", type=int, default=20)
    sp.add_argument("--tolerance", type=float, default=0.0)
    sp.add_argument("--guess", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--grid", action="store_true")
    sp.add_argument("--noiseless", action="store_true")
    sp.add_argument("--sweep", action="store_true")
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--output")
    sp.add_argument("--config")
    sp.add_argument("--calibration")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bench", help="microbenchmarks and calibration")
    sp.add_argument("--iterations", type=int, default=30)
    sp.add_argument("--kappa", type=int, nargs="+",
                    default=list(bench_mod.KAPPA_GRID))
    sp.add_argument("--modulus-bits", type=int, default=2048,
                    dest="modulus_bits")
    sp.add_argument("--csv", action="store_true")
    sp.add_argument("--calibrate")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("fragmentation", help="MTU sweep packet accounting")
    sp.add_argument("--mtu", type=int)
    sp.add_argument("--mtu-min", type=int, default=576, dest="mtu_min")
    sp.add_argument("--mtu-max", type=int, default=9000, dest="mtu_max")
    sp.add_argument("--step", type=int, default=1)
    sp.add_argument("--header-bytes", type=int, default=40, dest="header_bytes")
    sp.set_defaults(fn=cmd_fragmentation)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ProtocolReject as e:
        print(f"REJECTED {e.reason.name}: {e.detail}", file=sys.stderr)
        return EXIT_CODES[e.reason]


if __name__ == "__main__":
    sys.exit(main())
