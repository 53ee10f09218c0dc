import hashlib
import json

import numpy as np
import pytest
from scipy.special import ndtri

from gbpwls import corpus, fileio, oracle, randomness
from gbpwls.errors import ArtifactMismatchError, FileFormatError
from gbpwls.messages import run

from conftest import assert_close


class TestRandomness:
    def test_stream_key_spec(self):
        digest = hashlib.sha256(b"gbpwls:3:xtrue:1").digest()
        assert randomness.stream_key(3, "xtrue:1") == int.from_bytes(
            digest[:16], "big")

    def test_normals_from_raw_words(self):
        w = randomness.raw_words(3, "check", 5)
        u = ((w >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
        assert_close(randomness.standard_normals(3, "check", 5), ndtri(u),
                     1e-15)

    def test_streams_independent(self):
        a = randomness.standard_normals(3, "a", 4)
        b = randomness.standard_normals(3, "b", 4)
        assert not np.allclose(a, b)
        again = randomness.standard_normals(3, "a", 4)
        assert np.array_equal(a, again)

    def test_correlated_noise_cholesky(self):
        R = np.array([[2.0, 0.5], [0.5, 1.0]])
        n = randomness.standard_normals(9, "lbl", 2)
        assert_close(randomness.correlated_noise(9, "lbl", R),
                     np.linalg.cholesky(R) @ n, 1e-15)

    def test_noise_free_consistent(self, ring8):
        g = randomness.seeded_instance(ring8, 5, noise_free=True)
        x = randomness.draw_x_true(ring8, 5)
        e = g.edge(1, 2)
        assert_close(e.z, x[1] + x[2], 1e-15)

    def test_noise_free_recovers_truth(self, ring8):
        g = randomness.seeded_instance(ring8, 5, noise_free=True)
        ml = oracle.solve_ml(g)
        x = randomness.draw_x_true(ring8, 5)
        for i in ring8.node_ids:
            assert_close(ml.x_hat[i], x[i], 1e-9, f"node {i}")


class TestGraphFiles:
    def test_roundtrip(self, tmp_path, ring8_seeded):
        p = tmp_path / "g.json"
        fileio.save_graph(ring8_seeded, p)
        back = fileio.load_graph(p)
        assert fileio.graph_hash(back) == fileio.graph_hash(ring8_seeded)
        assert back.validate() == []

    def test_vector_roundtrip(self, tmp_path):
        g = corpus.build("dense7")
        p = tmp_path / "g.json"
        fileio.save_graph(g, p)
        assert fileio.graph_hash(fileio.load_graph(p)) == fileio.graph_hash(g)

    def test_unknown_keys_rejected(self):
        data = {"nodes": [{"id": 1, "dim": 1, "weight": 2}], "edges": []}
        with pytest.raises(FileFormatError):
            fileio.graph_from_dict(data)

    def test_partial_self_measurement_rejected(self):
        data = {"nodes": [{"id": 1, "dim": 1, "C": [[1.0]]}], "edges": []}
        with pytest.raises(FileFormatError):
            fileio.graph_from_dict(data)

    def test_malformed_json_reports_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"nodes": [\n  broken\n]}')
        with pytest.raises(FileFormatError, match="line 2"):
            fileio.load_graph(p)

    def test_hash_sensitive_to_values(self, ring8):
        g2 = randomness.seeded_instance(ring8, 1)
        assert fileio.graph_hash(ring8) != fileio.graph_hash(g2)


class TestScenarios:
    def test_roundtrip_reproduces_instance(self, tmp_path, ring8):
        scenario = fileio.make_scenario(ring8, 4)
        p = tmp_path / "s.json"
        fileio.save_scenario(scenario, p)
        applied = fileio.apply_scenario(ring8, fileio.load_scenario(p))
        direct = randomness.seeded_instance(ring8, 4)
        assert fileio.graph_hash(applied) == fileio.graph_hash(direct)

    def test_wrong_graph_rejected(self, ring8):
        scenario = fileio.make_scenario(corpus.build("ring6"), 4)
        with pytest.raises(ArtifactMismatchError):
            fileio.apply_scenario(ring8, scenario)

    def test_missing_keys_rejected(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"seed": 1}))
        with pytest.raises(FileFormatError):
            fileio.load_scenario(p)

    def test_scenario_bytes_deterministic(self, tmp_path, ring8):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        fileio.save_scenario(fileio.make_scenario(ring8, 4), p1)
        fileio.save_scenario(fileio.make_scenario(ring8, 4), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestTraceCsv:
    def test_layout_and_meta(self, tmp_path, ring8_seeded):
        trace, reason = run(ring8_seeded, 5, 0.0)
        p = tmp_path / "t.csv"
        fileio.write_trace_csv(p, trace, ring8_seeded, reason,
                               meta={"graph_sha256": "abc"})
        lines = p.read_text().splitlines()
        assert lines[0] == "# graph_sha256=abc"
        assert lines[1] == "# termination=iteration cap"
        assert lines[2] == "k,node,x_norm,q_trace,x_0"
        body = lines[3:]
        assert len(body) == 5 * 8
        first = body[0].split(",")
        assert first[0] == "1" and first[1] == "1"
        # repr round-trips exactly
        assert float(first[2]) == float(np.linalg.norm(trace[0].x_hat[1]))
