"""Role state machines: proximity gating, proof life cycle, rate limiting,
delegation path, and the anonymity shape of full runs."""
import math

import pytest

from slapx import dac, rlrs, vdf, wire
from slapx.errors import ProtocolReject, RejectReason, SlapxError
from slapx.protocol import (DISCLOSE_DEVICE, AccessPoint, DeviceProfile,
                            LocationProof, NeighborDevice, RadioEnv,
                            SeededRng, Puzzle, prox_verify, run_pol_ap,
                            run_pol_nd, run_service_request,
                            run_spectrum_query, window_of)

NOW = 120.0


class TestProxVerify:
    ENV = RadioEnv(shadowing_sigma_db=0.0)

    def d_for(self, meters):
        rss = self.ENV.rss_at(meters)
        rtt = 2.0 * meters / 299_792_458.0
        return rss, rtt

    def test_consistent_inputs_any_weight(self):
        rss, rtt = self.d_for(30.0)
        for w in (0.0, 0.3, 0.9, 1.0):
            est = prox_verify(rss, rtt, self.ENV, w)
            assert est.d_hat == pytest.approx(30.0, abs=0.01)

    def test_relay_high_rtt_weight_rejects(self):
        rss, _ = self.d_for(10.0)      # honest relay close to verifier
        _, rtt = self.d_for(70.0)      # true path of the distant attacker
        est = prox_verify(rss, rtt, self.ENV, 0.9)
        assert est.d_hat == pytest.approx(64.0, abs=0.01)
        assert est.d_hat > 50.0

    def test_relay_low_rtt_weight_spoofed(self):
        rss, _ = self.d_for(10.0)
        _, rtt = self.d_for(70.0)
        est = prox_verify(rss, rtt, self.ENV, 0.1)
        assert est.d_hat == pytest.approx(16.0, abs=0.01)
        assert est.d_hat <= 50.0

    def test_components_exposed(self):
        rss, rtt = self.d_for(30.0)
        est = prox_verify(rss, rtt, self.ENV, 0.5)
        assert est.d_rss == pytest.approx(30.0, abs=0.01)
        assert est.d_rtt == pytest.approx(30.0, abs=0.01)

    def test_invalid_weight(self):
        with pytest.raises(SlapxError):
            prox_verify(-60, 1e-7, self.ENV, 1.5)


class TestPolAp:
    def test_honest_client_within_threshold(self, deployment, client):
        proof, trace = run_pol_ap(client, deployment.ap, 10.0, 20.0, NOW)
        assert proof.window == window_of(NOW)
        assert trace.total_payload == 2456

    def test_claimed_coords_too_far(self, deployment, client):
        with pytest.raises(ProtocolReject) as e:
            run_pol_ap(client, deployment.ap, 60.0, 60.0, NOW)
        assert e.value.reason == RejectReason.NOT_PROXIMATE

    def test_estimated_distance_too_far(self, deployment, client):
        with pytest.raises(ProtocolReject) as e:
            run_pol_ap(client, deployment.ap, 10.0, 20.0, NOW,
                       true_distance_m=90.0)
        assert e.value.reason == RejectReason.NOT_PROXIMATE

    def test_stale_beacon(self, deployment, client):
        beacon = deployment.ap.beacon(NOW)
        nym, aux = client.fresh_nym()
        from slapx.protocol import presentation_context
        loc = dac.Attribute.location(5.0, 5.0).value
        win_b = window_of(NOW).to_bytes(8, "big")
        ctx = presentation_context("pol-ap", window_of(NOW), deployment.ap.ap_id)
        pres = dac.dac_cred_prove(client.view.dac_params, client.sk, nym, aux,
                                  client.cred, (), ctx, client.rng,
                                  payload=beacon.encode() + loc + win_b)
        content = wire.pack_fields(beacon.encode(), loc, win_b,
                                   pres.to_bytes(client.view.dac_params))
        with pytest.raises(ProtocolReject) as e:
            deployment.ap.issue_pol(content, NOW + 61.0, 5.0)
        assert e.value.reason == RejectReason.STALE_BEACON

    def test_forged_presentation_rejected(self, deployment, client):
        beacon = deployment.ap.beacon(NOW)
        loc = dac.Attribute.location(5.0, 5.0).value
        win_b = window_of(NOW).to_bytes(8, "big")
        proof, _ = run_pol_ap(client, deployment.ap, 5.0, 5.0, NOW)
        # reuse a presentation bound to a different payload
        nym, aux = client.fresh_nym()
        pres = dac.dac_cred_prove(client.view.dac_params, client.sk, nym, aux,
                                  client.cred, (), b"wrong-context", client.rng)
        content = wire.pack_fields(beacon.encode(), loc, win_b,
                                   pres.to_bytes(client.view.dac_params))
        with pytest.raises(ProtocolReject) as e:
            deployment.ap.issue_pol(content, NOW, 5.0)
        assert e.value.reason == RejectReason.BAD_CREDENTIAL


class TestSpectrumAndService:
    def test_full_happy_path(self, deployment, client):
        t = 300.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        record, puzzle, sig, tr = run_spectrum_query(
            client, deployment.psd, 10.0, 20.0, t, proof=proof)
        assert record.cell_x == 0.0 and record.cell_y == 0.0
        assert puzzle.tau == vdf.difficulty_for("default")
        token, sol, tr2 = run_service_request(
            client, deployment.server, b"report", puzzle, t, proof=proof)
        assert len(token) == 16
        # every grant is preceded by at least kappa sequential squarings
        assert sol.squarings >= puzzle.tau

    def test_replayed_proof_linked(self, deployment, client):
        t = 420.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        run_spectrum_query(client, deployment.psd, 10.0, 20.0, t, proof=proof)
        with pytest.raises(ProtocolReject) as e:
            run_spectrum_query(client, deployment.psd, 10.0, 20.0, t + 1,
                               proof=proof)
        assert e.value.reason == RejectReason.LINKED

    def test_expired_proof(self, deployment, client):
        t = 480.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        with pytest.raises(ProtocolReject) as e:
            run_spectrum_query(client, deployment.psd, 10.0, 20.0, t + 61.0,
                               proof=proof)
        assert e.value.reason == RejectReason.EXPIRED

    def test_query_coords_must_match_proof(self, deployment, client):
        t = 485.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        with pytest.raises(ProtocolReject) as e:
            run_spectrum_query(client, deployment.psd, 30.0, 20.0, t,
                               proof=proof)
        assert e.value.reason == RejectReason.BAD_POL

    def test_delegated_query_coords_must_match(self, deployment):
        _, nd_sk, nd_cred = deployment.authority.enroll(
            DeviceProfile(b"ND-LOCCH", 30.0, 0), delegable=True)
        nd = NeighborDevice(deployment.view, nd_sk, nd_cred, SeededRng(78))
        c = deployment.new_client(seed=2005)
        t = 490.0
        dcred, _ = run_pol_nd(c, nd, 5.0, 5.0, t, true_distance_m=10.0)
        with pytest.raises(ProtocolReject) as e:
            run_spectrum_query(c, deployment.psd, 25.0, 5.0, t, dcred=dcred)
        assert e.value.reason == RejectReason.BAD_POL

    def test_out_of_area_query(self, deployment, client):
        t = 540.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        # proof binds the coordinates; out-of-area coords hit the database gate
        from slapx.spectrumdb import SpectrumDatabase
        with pytest.raises(ProtocolReject) as e:
            deployment.psd.db.lookup(20_000.0, 0.0)
        assert e.value.reason == RejectReason.OUT_OF_AREA

    def test_wrong_message_solution_rejected(self, deployment, client):
        t = 600.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        record, puzzle, sig, _ = run_spectrum_query(
            client, deployment.psd, 10.0, 20.0, t, proof=proof)
        sol = vdf.vdf_eval(puzzle.params(), puzzle.challenge_for(b"other"))
        with pytest.raises(ProtocolReject) as e:
            run_service_request(client, deployment.server, b"report", puzzle,
                                t, proof=proof, solution=sol)
        assert e.value.reason == RejectReason.BAD_SOLUTION

    def test_unknown_puzzle_rejected(self, deployment, client):
        t = 660.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        record, puzzle, sig, _ = run_spectrum_query(
            client, deployment.psd, 10.0, 20.0, t, proof=proof)
        forged = Puzzle(puzzle_id=b"\xff" * 8, modulus_n=puzzle.modulus_n,
                        tau=puzzle.tau, seed=puzzle.seed,
                        issued_s=puzzle.issued_s, expires_s=puzzle.expires_s)
        with pytest.raises(ProtocolReject) as e:
            run_service_request(client, deployment.server, b"m", forged, t,
                                proof=proof)
        assert e.value.reason == RejectReason.BAD_PUZZLE

    def test_missing_solution_rejected(self, deployment, client):
        t = 3000.0
        proof, _ = run_pol_ap(client, deployment.ap, 11.0, 20.0, t)
        record, puzzle, sig, _ = run_spectrum_query(
            client, deployment.psd, 11.0, 20.0, t, proof=proof)
        nym, aux = client.fresh_nym()
        pres = dac.dac_cred_prove(
            client.view.dac_params, client.sk, nym, aux,
            client.cred, DISCLOSE_DEVICE, b"junk", client.rng)
        content = wire.pack_fields(
            b"m", puzzle.puzzle_id, b"",  # solution absent
            pres.to_bytes(client.view.dac_params),
            proof.encode(client.view.rlrs_params))
        with pytest.raises(ProtocolReject):
            deployment.server.handle_service_request(content, t)

    def test_expired_puzzle_rejected(self, deployment, client):
        t = 3120.0
        proof, _ = run_pol_ap(client, deployment.ap, 12.0, 20.0, t)
        record, puzzle, sig, _ = run_spectrum_query(
            client, deployment.psd, 12.0, 20.0, t, proof=proof)
        # solving is legal any time; redeeming after expiry is not
        stale = t + 61.0
        fresh_proof, _ = run_pol_ap(client, deployment.ap, 12.0, 20.0, stale)
        with pytest.raises(ProtocolReject) as e:
            run_service_request(client, deployment.server, b"m", puzzle,
                                stale, proof=fresh_proof)
        assert e.value.reason == RejectReason.EXPIRED

    def test_attacker_difficulty_escalated(self, deployment):
        flagged = deployment.new_client(
            DeviceProfile(b"EVIL-042", 30.0, 2), seed=4242)
        t = 720.0
        proof, _ = run_pol_ap(flagged, deployment.ap, 10.0, 20.0, t)
        record, puzzle, sig, _ = run_spectrum_query(
            flagged, deployment.psd, 10.0, 20.0, t, proof=proof)
        assert puzzle.tau == vdf.difficulty_for("flagged")


class TestNdPath:
    @pytest.fixture()
    def nd(self, deployment):
        _, nd_sk, nd_cred = deployment.authority.enroll(
            DeviceProfile(b"ND-00001", 30.0, 0), delegable=True)
        return NeighborDevice(deployment.view, nd_sk, nd_cred, SeededRng(77))

    def test_delegated_flow(self, deployment, nd):
        t = 780.0
        c = deployment.new_client(seed=2002)
        dcred, tr = run_pol_nd(c, nd, 5.0, 5.0, t, true_distance_m=10.0)
        assert tr.total_payload == 1944
        assert dcred.dk is None
        record, puzzle, sig, tr2 = run_spectrum_query(
            c, deployment.psd, 5.0, 5.0, t, dcred=dcred)
        token, sol, _ = run_service_request(c, deployment.server, b"m", puzzle,
                                            t, dcred=dcred)
        assert len(token) == 16

    def test_distance_fraud_rejected(self, deployment, nd):
        c = deployment.new_client(seed=2003)
        with pytest.raises(ProtocolReject) as e:
            run_pol_nd(c, nd, 5.0, 5.0, 840.0, true_distance_m=80.0)
        assert e.value.reason == RejectReason.DBP_FAILED

    def test_delegated_grant_rate_limited(self, deployment, nd):
        t = 900.0
        c = deployment.new_client(seed=2004)
        dcred, _ = run_pol_nd(c, nd, 5.0, 5.0, t, true_distance_m=10.0)
        run_spectrum_query(c, deployment.psd, 5.0, 5.0, t, dcred=dcred)
        with pytest.raises(ProtocolReject) as e:
            run_spectrum_query(c, deployment.psd, 5.0, 5.0, t + 1, dcred=dcred)
        assert e.value.reason == RejectReason.LINKED


class TestRevocation:
    def test_double_issuing_ap_identified(self, deployment):
        t = 960.0
        a = deployment.new_client(seed=3001)
        b = deployment.new_client(seed=3002)
        # the AP issues two proofs for one event scope (same coords/window)
        proof_a, _ = run_pol_ap(a, deployment.ap, 10.0, 20.0, t)
        proof_b, _ = run_pol_ap(b, deployment.ap, 10.0, 20.0, t)
        assert proof_a.sig.tau == proof_b.sig.tau
        ring = deployment.view.ring
        who = deployment.authority.revoke_double_issuer(
            proof_a.event(), ring, (proof_a.m, proof_a.sig),
            ring, (proof_b.m, proof_b.sig))
        assert who == deployment.ap.ap_id

    def test_distinct_events_not_linked(self, deployment):
        t = 1020.0
        a = deployment.new_client(seed=3003)
        proof_a, _ = run_pol_ap(a, deployment.ap, 10.0, 20.0, t)
        proof_b, _ = run_pol_ap(a, deployment.ap, 15.0, 20.0, t)  # other coords
        assert proof_a.sig.tau != proof_b.sig.tau


class TestAnonymityShape:
    def test_two_runs_share_no_crypto_bytes(self, deployment):
        c = deployment.new_client(seed=4001)
        fields = []
        for t in (1080.0, 1140.0):  # consecutive windows
            proof, tr1 = run_pol_ap(c, deployment.ap, 10.0, 20.0, t)
            _, puzzle, _, tr2 = run_spectrum_query(
                c, deployment.psd, 10.0, 20.0, t, proof=proof)
            _, _, tr3 = run_service_request(c, deployment.server, b"m",
                                            puzzle, t, proof=proof)
            run = {}
            for tr in (tr1, tr2, tr3):
                for name, v in tr.fields.items():
                    run[f"{tr.phase}.{name}"] = v
            fields.append(run)
        for key in fields[0]:
            assert fields[0][key] != fields[1][key], f"{key} repeated across runs"

    def test_proof_encoding_roundtrip(self, deployment, client):
        t = 1200.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        blob = proof.encode(deployment.view.rlrs_params)
        back = LocationProof.decode(blob, deployment.view.rlrs_params)
        assert back.sig == proof.sig
        assert back.event() == proof.event()


class TestWireObjects:
    def test_puzzle_serialization_roundtrip(self, deployment, client):
        t = 1260.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        _, puzzle, _, _ = run_spectrum_query(client, deployment.psd, 10.0,
                                             20.0, t, proof=proof)
        blob = puzzle.encode()
        assert blob[0] == 1  # tag byte, then length-prefixed N, tau, seed
        assert Puzzle.decode(blob) == puzzle

    def test_solution_wire_fields(self, deployment, client):
        t = 1320.0
        proof, _ = run_pol_ap(client, deployment.ap, 10.0, 20.0, t)
        _, puzzle, _, _ = run_spectrum_query(client, deployment.psd, 10.0,
                                             20.0, t, proof=proof)
        _, sol, tr = run_service_request(client, deployment.server, b"m",
                                         puzzle, t, proof=proof)
        ell_b, pi_b, y_b = wire.unpack_fields(tr.fields["solution"], 3)
        assert int.from_bytes(ell_b, "big") == sol.ell
        assert int.from_bytes(pi_b, "big") == sol.pi
        assert int.from_bytes(y_b, "big") == sol.y

    def test_beacon_unique_per_window(self, deployment):
        b1 = deployment.ap.beacon(1380.0)
        b2 = deployment.ap.beacon(1381.0)   # same window
        b3 = deployment.ap.beacon(1440.0)   # next window
        assert b1 == b2
        assert b1.encode() != b3.encode()
        assert len(b1.encode()) == 32


class TestRadioModel:
    def test_rss_monotone_decreasing_in_distance(self):
        env = RadioEnv(shadowing_sigma_db=0.0)
        samples = [env.rss_at(d) for d in (1, 5, 20, 50, 100, 400)]
        assert samples == sorted(samples, reverse=True)

    def test_rss_inversion_is_consistent(self):
        env = RadioEnv(shadowing_sigma_db=0.0)
        for d in (0.5, 3.0, 42.0, 180.0):
            assert env.distance_from_rss(env.rss_at(d)) == pytest.approx(d)

    def test_rtt_leg_is_light_speed(self):
        env = RadioEnv(shadowing_sigma_db=0.0)
        est = prox_verify(env.rss_at(10.0), 2.0 * 75.0 / 299_792_458.0,
                          env, 1.0)
        assert est.d_rtt == pytest.approx(75.0)
