"""Generation service: request parsing, the job table, the FIFO worker, and
the HTTP surface end to end on an ephemeral port."""

import base64
import http.client
import io
import json
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from dragflow.model import ModelConfig, VideoModel
from dragflow.service import (
    GenerateRequest,
    JobRecord,
    RequestError,
    StudioService,
    execute_request,
    make_server,
    parse_generate_request,
)
from dragflow.sprites import default_vocab
from dragflow.video_io import read_video_dir

RNG = np.random.default_rng


def tiny_model(seed=0):
    vocab = default_vocab()
    cfg = ModelConfig(levels=2, channels=(6, 8), frames=3, height=8, width=8,
                      vocab_size=len(vocab.tokens), text_length=8, text_dim=8,
                      image_cond_channels=4, trajectory_cond_channels=4,
                      cond_hidden=5, heads=2, time_dim=12, timesteps=10)
    return VideoModel(cfg, vocab, RNG(seed))


def stroke_doc(frames=3, w=8, h=8):
    return {
        "canvas": {"width": w, "height": h, "frames": frames},
        "strokes": [[{"x": 1.0, "y": 1.0}, {"x": 6.0, "y": 6.0}]],
    }


BASE = np.zeros((3, 8, 8))


class TestParseGenerateRequest:
    def test_defaults(self):
        m = tiny_model()
        req = parse_generate_request({}, m, BASE, seed_rng=RNG(0))
        assert req.caption == ""
        assert req.guidance == 3.0
        assert req.seed_was_absent and req.seed >= 0
        assert req.motion.shape == (2, 2, 8, 8)
        assert np.all(req.motion == 0.0)
        assert np.array_equal(req.first_frame, BASE)

    def test_absent_seed_drawn_from_rng_deterministically(self):
        m = tiny_model()
        a = parse_generate_request({}, m, BASE, seed_rng=RNG(42))
        b = parse_generate_request({}, m, BASE, seed_rng=RNG(42))
        assert a.seed == b.seed

    def test_unknown_field_rejected(self):
        with pytest.raises(RequestError) as exc:
            parse_generate_request({"capton": "x"}, tiny_model(), BASE)
        assert "capton" in str(exc.value)

    def test_unknown_caption_word_warns_but_passes(self):
        req = parse_generate_request({"caption": "red warpcore", "seed": 1},
                                     tiny_model(), BASE)
        assert any("warpcore" in w for w in req.warnings)

    def test_strokes_become_motion(self):
        req = parse_generate_request({"strokes": stroke_doc(), "seed": 1},
                                     tiny_model(), BASE)
        assert req.motion.shape == (2, 2, 8, 8)
        assert np.any(req.motion != 0.0)
        assert req.document is not None

    def test_stroke_frame_count_must_match_model(self):
        with pytest.raises(RequestError) as exc:
            parse_generate_request({"strokes": stroke_doc(frames=5)},
                                   tiny_model(), BASE)
        assert "frames" in str(exc.value)

    def test_malformed_stroke_names_field_path(self):
        doc = stroke_doc()
        doc["strokes"][0][1] = {"x": "NaN", "y": 2}
        with pytest.raises(RequestError) as exc:
            parse_generate_request({"strokes": doc}, tiny_model(), BASE)
        assert "strokes[0][1].x" in str(exc.value)

    @pytest.mark.parametrize("seed", [-1, 1.5, True, "7"])
    def test_bad_seed_rejected(self, seed):
        with pytest.raises(RequestError):
            parse_generate_request({"seed": seed}, tiny_model(), BASE)

    @pytest.mark.parametrize("guidance", [-0.5, float("inf"), float("nan"), "big", True])
    def test_bad_guidance_rejected(self, guidance):
        with pytest.raises(RequestError):
            parse_generate_request({"seed": 1, "guidance": guidance},
                                   tiny_model(), BASE)

    def test_png_image_round_trips(self):
        from PIL import Image

        m = tiny_model()
        rgb = (RNG(3).random((8, 8, 3)) * 255).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(rgb, "RGB").save(buf, "PNG")
        b64 = base64.b64encode(buf.getvalue()).decode("ascii")
        req = parse_generate_request({"image": {"png": b64}, "seed": 1}, m, BASE)
        assert np.allclose(req.first_frame, rgb.transpose(2, 0, 1) / 255.0)

    def test_wrong_size_png_rejected(self):
        from PIL import Image

        buf = io.BytesIO()
        Image.new("RGB", (4, 4)).save(buf, "PNG")
        b64 = base64.b64encode(buf.getvalue()).decode("ascii")
        with pytest.raises(RequestError):
            parse_generate_request({"image": {"png": b64}, "seed": 1},
                                   tiny_model(), BASE)


class TestJobRecord:
    def test_legal_lifecycle(self):
        job = JobRecord(id="job-000001")
        job.advance("running")
        job.advance("done")
        assert job.state == "done"

    @pytest.mark.parametrize("path", [
        ("queued", "done"), ("queued", "failed"), ("done", "running")])
    def test_illegal_transitions_rejected(self, path):
        start, nxt = path
        job = JobRecord(id="j", state=start)
        with pytest.raises(RuntimeError):
            job.advance(nxt)

    def test_to_dict_lists_frame_urls_by_count(self):
        job = JobRecord(id="job-7", state="done", frame_count=3, seed=5)
        d = job.to_dict()
        assert d["frames"] == [f"/api/jobs/job-7/frames/{k}" for k in range(3)]
        assert d["seed"] == 5 and d["state"] == "done"


def wait_done(service, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = service.job(job_id)
        if job.state in ("done", "failed"):
            return job
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish")


class TestStudioService:
    @pytest.fixture()
    def service(self, tmp_path):
        svc = StudioService(tiny_model(), tmp_path / "artifacts", seed_rng=RNG(1))
        yield svc
        svc.stop()

    def test_job_runs_to_done_with_progress(self, service):
        job = service.submit({"caption": "", "seed": 4, "guidance": 1.0})
        done = wait_done(service, job.id)
        assert done.state == "done"
        assert done.progress_step == done.progress_total == 10
        assert done.frame_count == 3
        for k in range(3):
            assert service.frame_path(job.id, k).exists()

    def test_matches_direct_execute_request(self, service, tmp_path):
        body = {"caption": "red square moves right", "seed": 11, "guidance": 2.0}
        job = service.submit(dict(body))
        done = wait_done(service, job.id)
        model = tiny_model()
        req = parse_generate_request(dict(body), model, BASE)
        execute_request(model, req, tmp_path / "direct")
        via_service = read_video_dir(done.directory)
        direct = read_video_dir(tmp_path / "direct")
        assert np.array_equal(via_service, direct)

    def test_invalid_body_raises_before_queueing(self, service):
        with pytest.raises(RequestError):
            service.submit({"seed": -3})

    def test_submitted_strokes_echoed_unchanged(self, service):
        doc = stroke_doc()
        job = service.submit({"seed": 2, "strokes": doc})
        assert job.to_dict()["strokes"] == doc
        plain = service.submit({"seed": 3})
        assert plain.to_dict()["strokes"] is None

    def test_single_worker_runs_jobs_in_submission_order(self, service):
        ids = [service.submit({"seed": s, "guidance": 0.0}).id for s in (1, 2, 3)]
        deadline = time.time() + 60
        while time.time() < deadline:
            states = [service.job(i).state for i in ids]
            assert states.count("running") <= 1
            for i in range(1, len(ids)):
                if states[i] in ("running", "done"):
                    assert all(s == "done" for s in states[:i])
            if all(s == "done" for s in states):
                break
            time.sleep(0.01)
        assert all(service.job(i).state == "done" for i in ids)

    def test_frame_path_guarded(self, service):
        job = service.submit({"seed": 9})
        wait_done(service, job.id)
        assert service.frame_path(job.id, 99) is None
        assert service.frame_path("job-999999", 0) is None

    def test_canvas_payload_shape(self, service):
        from PIL import Image

        payload = service.canvas_payload()
        assert (payload["width"], payload["height"], payload["frames"]) == (8, 8, 3)
        png = base64.b64decode(payload["image"])
        with Image.open(io.BytesIO(png)) as im:
            assert im.size == (8, 8)


class TestHttpApi:
    @pytest.fixture()
    def server(self, tmp_path):
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<h1>studio</h1>")
        svc = StudioService(tiny_model(), tmp_path / "artifacts",
                            static_dir=static, seed_rng=RNG(2))
        httpd = make_server(svc, "127.0.0.1", 0)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        yield f"http://127.0.0.1:{httpd.server_address[1]}", svc
        httpd.shutdown()
        httpd.server_close()
        svc.stop()

    def get(self, url):
        with urllib.request.urlopen(url) as resp:
            return resp.status, resp.read()

    def post(self, url, payload):
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        req = urllib.request.Request(
            url, data=data, headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())

    def test_health(self, server):
        base, _ = server
        status, body = self.get(base + "/api/health")
        assert status == 200
        payload = json.loads(body)
        assert payload["status"] == "ok"

    def test_canvas(self, server):
        base, _ = server
        status, body = self.get(base + "/api/canvas")
        payload = json.loads(body)
        assert status == 200
        assert payload["width"] == 8 and payload["frames"] == 3

    def test_full_generation_round_trip(self, server):
        base, svc = server
        status, out = self.post(base + "/api/generate",
                                {"caption": "", "seed": 6, "guidance": 1.0})
        assert status == 200
        assert out["seed"] == 6
        job_id = out["job_id"]
        deadline = time.time() + 60
        while time.time() < deadline:
            _, body = self.get(f"{base}/api/jobs/{job_id}")
            state = json.loads(body)
            if state["state"] == "done":
                break
            time.sleep(0.05)
        assert state["state"] == "done"
        assert len(state["frames"]) == 3
        status, png = self.get(base + state["frames"][0])
        assert status == 200
        disk = svc.frame_path(job_id, 0).read_bytes()
        assert png == disk

    def test_invalid_json_is_400(self, server):
        base, _ = server
        with pytest.raises(urllib.error.HTTPError) as exc:
            self.post(base + "/api/generate", b"{nope")
        assert exc.value.code == 400

    def test_bad_request_field_is_400_with_message(self, server):
        base, _ = server
        with pytest.raises(urllib.error.HTTPError) as exc:
            self.post(base + "/api/generate", {"seed": -1})
        assert exc.value.code == 400
        assert "seed" in json.loads(exc.value.read())["error"]

    def test_unknown_job_is_404(self, server):
        base, _ = server
        with pytest.raises(urllib.error.HTTPError) as exc:
            self.get(base + "/api/jobs/job-424242")
        assert exc.value.code == 404

    def test_unknown_frame_is_404(self, server):
        base, _ = server
        _, out = self.post(base + "/api/generate", {"seed": 8, "guidance": 0.0})
        job_id = out["job_id"]
        deadline = time.time() + 60
        while time.time() < deadline:
            _, body = self.get(f"{base}/api/jobs/{job_id}")
            if json.loads(body)["state"] == "done":
                break
            time.sleep(0.05)
        with pytest.raises(urllib.error.HTTPError) as exc:
            self.get(f"{base}/api/jobs/{job_id}/frames/99")
        assert exc.value.code == 404

    def test_static_index_served(self, server):
        base, _ = server
        status, body = self.get(base + "/")
        assert status == 200
        assert b"studio" in body

    def test_path_traversal_blocked(self, server):
        base, _ = server
        host = base.split("//")[1]
        conn = http.client.HTTPConnection(host, timeout=10)
        conn.request("GET", "/../../etc/passwd")
        resp = conn.getresponse()
        body = resp.read()
        conn.close()
        assert resp.status in (400, 404)
        assert b"root:" not in body

    def test_same_seed_jobs_byte_identical(self, server):
        base, svc = server
        ids = []
        for _ in range(2):
            _, out = self.post(base + "/api/generate",
                               {"caption": "", "seed": 21, "guidance": 1.5})
            ids.append(out["job_id"])
        for i in ids:
            deadline = time.time() + 60
            while time.time() < deadline:
                _, body = self.get(f"{base}/api/jobs/{i}")
                if json.loads(body)["state"] == "done":
                    break
                time.sleep(0.05)
        a = read_video_dir(svc.job(ids[0]).directory)
        b = read_video_dir(svc.job(ids[1]).directory)
        assert np.array_equal(a, b)
