import base64

import numpy as np
import pytest

from matpal import synthesis
from matpal.errors import BackendError, InvalidInputError
from matpal.metrics import perceptual_distance
from matpal.synthesis import (
    CLASS_PRESETS,
    ConceptHandle,
    ProceduralBackend,
    RemoteBackend,
    TextureCandidate,
    crop_digest,
    generate,
    learn_concept,
    render_texture,
    select_best,
)
from matpal.tiling import SeamReport, seam_score


def _stripy_crops(n=2, side=128, seed=0):
    tex = render_texture(CLASS_PRESETS["stripes"], 256, seed)
    offs = [(0, 0), (64, 64), (32, 96), (96, 32)]
    return [tex[y:y + side, x:x + side] for y, x in offs[:n]]


# --- candidate invariants -------------------------------------------------

def test_candidate_must_be_square():
    img = np.zeros((32, 64, 3), np.float32)
    with pytest.raises(InvalidInputError):
        TextureCandidate(img, "noise", "p", 0, False, seam_score(img))


def test_tileable_candidate_rejects_bad_seam():
    rng = np.random.default_rng(0)
    img = np.zeros((64, 64, 3), np.float32)
    img[:32] = 1.0  # hard seam against vertical wrap
    report = seam_score(img)
    assert report.combined > synthesis.TILEABLE_SEAM_MAX
    with pytest.raises(InvalidInputError):
        TextureCandidate(img, "noise", "p", 0, True, report)
    # same image is fine when not claimed tileable
    TextureCandidate(img, "noise", "p", 0, False, report)


# --- procedural backend ---------------------------------------------------

def test_procedural_tileable_seam_bound():
    backend = ProceduralBackend()
    for token in ("stripes", "bricks", "dots", "noise"):
        for cand in generate(backend, token, resolution=256, n=2, tileable=True,
                             seed=11):
            assert cand.seam.combined <= synthesis.TILEABLE_SEAM_MAX


def test_procedural_determinism():
    backend = ProceduralBackend()
    a = generate(backend, "bricks", resolution=256, n=2, tileable=True, seed=3)
    b = generate(backend, "bricks", resolution=256, n=2, tileable=True, seed=3)
    c = generate(backend, "bricks", resolution=256, n=2, tileable=True, seed=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.image, y.image)
    assert not np.array_equal(a[0].image, c[0].image)


def test_procedural_matches_crop_mean():
    rng = np.random.default_rng(5)
    base = np.full((128, 128, 3), (0.3, 0.6, 0.4), np.float32)
    crops = [np.clip(base + rng.normal(0, 0.01, base.shape), 0, 1).astype(np.float32)
             for _ in range(3)]
    backend = ProceduralBackend()
    handle = learn_concept(backend, crops, seed=0)
    cand = generate(backend, handle, resolution=256, n=1, tileable=True, seed=0)[0]
    got = cand.image.mean(axis=(0, 1))
    want = np.mean([c.mean(axis=(0, 1)) for c in crops], axis=0)
    assert np.abs(got - want).max() < 0.02


def test_learn_concept_handle_contents():
    backend = ProceduralBackend()
    crops = _stripy_crops()
    handle = learn_concept(backend, crops, seed=2)
    assert isinstance(handle, ConceptHandle)
    assert handle.backend_id == "procedural"
    assert handle.created_from == tuple(crop_digest(c) for c in crops)
    assert "{token}" not in handle.prompt_train
    # same crops + seed -> same concept id
    assert learn_concept(backend, crops, seed=2).concept_id == handle.concept_id


def test_learn_concept_validates_crops():
    backend = ProceduralBackend()
    with pytest.raises(InvalidInputError):
        learn_concept(backend, [])
    with pytest.raises(InvalidInputError):
        learn_concept(backend, [np.zeros((64, 64, 3)), np.zeros((32, 32, 3))])


def test_generate_resolution_validation():
    backend = ProceduralBackend()
    for bad in (128, 300, 8192):
        with pytest.raises(InvalidInputError):
            generate(backend, "noise", resolution=bad)
    with pytest.raises(InvalidInputError):
        generate(backend, "noise", resolution=256, n=0)


def test_generate_high_resolution_assembly():
    backend = ProceduralBackend()
    cand = generate(backend, "noise", resolution=2048, n=1, tileable=True,
                    seed=7)[0]
    assert cand.image.shape == (2048, 2048, 3)
    assert cand.patches_used >= 4
    assert cand.seam.combined <= synthesis.TILEABLE_SEAM_MAX


# --- selection ------------------------------------------------------------

def test_select_best_brute_force_oracle():
    backend = ProceduralBackend()
    crops = _stripy_crops(n=3)
    cands = generate(backend, "stripes", resolution=256, n=4, tileable=True,
                     seed=0) + generate(backend, "dots", resolution=256, n=2,
                                        tileable=True, seed=0)
    idx, score = select_best(cands, crops)
    # independent brute-force replay
    import cv2

    side = crops[0].shape[0]
    scores = []
    for c in cands:
        img = cv2.resize(c.image, (side, side), interpolation=cv2.INTER_AREA)
        scores.append(np.mean([perceptual_distance(img, f.astype(np.float32))
                               for f in crops]))
    assert idx == int(np.argmin(scores))
    assert score == pytest.approx(min(scores))
    assert idx < 4  # a stripes candidate should win for stripes crops


def test_select_best_tie_breaks_low_index():
    img = np.full((64, 64, 3), 0.5, np.float32)
    cands = [TextureCandidate(img.copy(), "noise", "p", s, False, seam_score(img))
             for s in range(3)]
    idx, _ = select_best(cands, [img])
    assert idx == 0


def test_select_best_validates_inputs():
    img = np.full((64, 64, 3), 0.5, np.float32)
    cand = TextureCandidate(img, "noise", "p", 0, False, seam_score(img))
    with pytest.raises(InvalidInputError):
        select_best([], [img])
    with pytest.raises(InvalidInputError):
        select_best([cand], [])


# --- remote backend against a fake service --------------------------------

def _fake_service():
    from fastapi import FastAPI, HTTPException

    app = FastAPI()
    state = {"concepts": {}, "fail_next": 0, "calls": []}

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/concepts")
    def concepts(body: dict):
        state["calls"].append(("concepts", body))
        if not body.get("images"):
            raise HTTPException(422, detail="images required")
        cid = f"c{len(state['concepts'])}"
        state["concepts"][cid] = body
        return {"concept_id": cid}

    @app.post("/v1/generate")
    def gen(body: dict):
        state["calls"].append(("generate", body))
        if state["fail_next"] > 0:
            state["fail_next"] -= 1
            raise HTTPException(503, detail={"code": "busy", "message": "overloaded"})
        rng = np.random.default_rng(body["seed"])
        images = []
        for _ in range(body["n"]):
            img = rng.uniform(size=(body["height"], body["width"], 3))
            import cv2

            data = np.round(img * 255).astype(np.uint8)
            ok, buf = cv2.imencode(".png", cv2.cvtColor(data, cv2.COLOR_RGB2BGR))
            images.append(base64.b64encode(buf.tobytes()).decode())
        return {"images": images}

    return app, state


def _sync_asgi_transport(app):
    import asyncio

    import httpx

    class SyncASGI(httpx.BaseTransport):
        def __init__(self):
            self._inner = httpx.ASGITransport(app=app)

        def handle_request(self, request):
            async def call():
                req = httpx.Request(request.method, request.url,
                                    headers=request.headers,
                                    content=request.read())
                resp = await self._inner.handle_async_request(req)
                await resp.aread()
                return httpx.Response(resp.status_code, headers=resp.headers,
                                      content=resp.content)

            return asyncio.run(call())

    return SyncASGI()


@pytest.fixture()
def remote():
    app, state = _fake_service()
    backend = RemoteBackend("http://fake", transport=_sync_asgi_transport(app))
    return backend, state


def test_remote_health(remote):
    backend, _ = remote
    assert backend.health()["status"] == "ok"


def test_remote_learn_and_generate(remote):
    backend, state = remote
    crops = _stripy_crops()
    handle = learn_concept(backend, crops, seed=0)
    assert handle.concept_id in state["concepts"]
    sent = state["concepts"][handle.concept_id]
    assert len(sent["images"]) == len(crops)
    assert sent["prompt_train"] == "an object with S* texture"

    cands = generate(backend, handle, resolution=256, n=2, tileable=False, seed=9)
    assert len(cands) == 2
    assert cands[0].image.shape == (256, 256, 3)
    assert 0.0 <= cands[0].image.min() and cands[0].image.max() <= 1.0
    body = state["calls"][-1][1]
    assert body["concept_id"] == handle.concept_id
    assert body["width"] == body["height"] == 256


def test_remote_error_surfaces_as_backend_error(remote):
    backend, state = remote
    state["fail_next"] = 10
    with pytest.raises(BackendError):
        backend.generate_images("c0", "p", 256, 1, False, 0)


def test_remote_unreachable_is_retryable():
    import httpx

    class Down(httpx.BaseTransport):
        def handle_request(self, request):
            raise httpx.ConnectError("refused", request=request)

    backend = RemoteBackend("http://down", transport=Down(), retries=1)
    with pytest.raises(BackendError) as exc:
        backend.learn_concept(_stripy_crops(1), "p", seed=0)
    assert exc.value.retryable
