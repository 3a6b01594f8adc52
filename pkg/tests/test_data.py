import warnings

import numpy as np
import pytest

from accsinkhorn.data import (
    BilingualDictionary,
    PointCloud,
    SplitMix64,
    cost_cosine,
    cost_sqeuclidean,
    file_digest,
    load_dictionary,
    load_image,
    load_word_vectors,
    parse_synthetic_spec,
    read_instance_csv,
    sample_pixels,
    save_image,
    synthetic_instance,
    write_instance_csv,
)
from accsinkhorn.errors import DuplicateWord, ImageTooSmall, MalformedLine, VocabularyTooSmall, ZeroVector

MASK = (1 << 64) - 1


def splitmix_reference(seed, count):
    state, out = seed, []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_splitmix_published_vector():
    got = SplitMix64(0).next_uint64(3)
    assert [int(x) for x in got] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@pytest.mark.parametrize("seed", [1, 7, 2**63 + 5, 123456789])
def test_splitmix_matches_scalar_reference(seed):
    rng = SplitMix64(seed)
    first = rng.next_uint64(5)
    second = rng.next_uint64(4)
    ref = splitmix_reference(seed & MASK, 9)
    assert [int(x) for x in np.concatenate([first, second])] == ref


def test_uniform_and_below_ranges():
    rng = SplitMix64(3)
    u = rng.uniform(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    b = SplitMix64(4).below(np.full(10_000, 7))
    assert set(np.unique(b)) == set(range(7))
    z = SplitMix64(5).normal(20_001)
    assert z.size == 20_001 and abs(z.mean()) < 0.05 and abs(z.std() - 1) < 0.05


def test_synthetic_instance_contract():
    p = synthetic_instance(100, 50, 7)
    assert p.shape == (100, 50)
    for x in (p.a, p.b, p.C):
        assert abs(x.sum() - 1.0) <= 1e-12
    q = synthetic_instance(100, 50, 7)
    assert p.a.tobytes() == q.a.tobytes() and p.C.tobytes() == q.C.tobytes()
    assert synthetic_instance(100, 50, 8).C.tobytes() != p.C.tobytes()


def test_synthetic_draw_order():
    rng = SplitMix64(9)
    a, b, C = rng.uniform(3), rng.uniform(2), rng.uniform(6)
    p = synthetic_instance(3, 2, 9)
    np.testing.assert_allclose(p.a, a / a.sum(), rtol=1e-15)
    np.testing.assert_allclose(p.b, b / b.sum(), rtol=1e-15)
    np.testing.assert_allclose(p.C, C.reshape(3, 2) / C.sum(), rtol=1e-15)


def test_parse_synthetic_spec():
    assert parse_synthetic_spec("n=100,m=50,seed=7") == {"n": 100, "m": 50, "seed": 7}
    assert parse_synthetic_spec("n=4") == {"n": 4, "m": 4, "seed": 0}
    with pytest.raises(ValueError):
        parse_synthetic_spec("n=4,k=2")


def test_instance_csv_round_trip(tmp_path):
    p = synthetic_instance(4, 3, 2, 0.125)
    path = tmp_path / "inst.csv"
    write_instance_csv(p, path)
    q = read_instance_csv(path)
    assert q.epsilon == 0.125
    for x, y in ((p.a, q.a), (p.b, q.b), (p.C, q.C)):
        assert x.tobytes() == y.tobytes()
    assert read_instance_csv(path, epsilon=2.0).epsilon == 2.0


def test_instance_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n")
    with pytest.raises(MalformedLine):
        read_instance_csv(path)


def checker(h, w):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[::2, ::2] = 255
    img[..., 1] = np.arange(w, dtype=np.uint8)[None, :]
    return img


def test_image_round_trip(tmp_path):
    img = checker(5, 7)
    path = tmp_path / "x.png"
    save_image(path, img / 255.0)
    np.testing.assert_array_equal(load_image(path), img)
    ppm = tmp_path / "x.ppm"
    from PIL import Image

    Image.fromarray(img).save(ppm)
    np.testing.assert_array_equal(load_image(ppm), img)


def test_sample_pixels_exhaustive_and_deterministic():
    img = checker(4, 5)
    s = sample_pixels(img, 20, 3)
    assert sorted(s.labels) == list(range(20))
    flat = img.reshape(-1, 3) / 255.0
    np.testing.assert_array_equal(s.points, flat[s.labels])
    t = sample_pixels(img, 7, 11)
    assert t.labels == sample_pixels(img, 7, 11).labels
    assert len(set(t.labels)) == 7


def test_sample_pixels_black_and_too_small():
    black = np.zeros((3, 3, 3), dtype=np.uint8)
    np.testing.assert_array_equal(sample_pixels(black, 4, 0).points, 0.0)
    with pytest.raises(ImageTooSmall):
        sample_pixels(black, 10, 0)


def test_cost_sqeuclidean():
    one = PointCloud(np.array([[0.2, 0.3, 0.4]]))
    np.testing.assert_array_equal(cost_sqeuclidean(one, one), [[0.0]])
    pts = PointCloud(np.array([[0.0, 0, 0], [1.0, 1, 1]]))
    np.testing.assert_allclose(cost_sqeuclidean(pts, pts), [[0, 1], [1, 0]], atol=1e-15)
    rng = np.random.default_rng(0)
    X, Y = rng.uniform(size=(6, 3)), rng.uniform(size=(4, 3))
    C = cost_sqeuclidean(PointCloud(X), PointCloud(Y))
    raw = ((X[:, None] - Y[None]) ** 2).sum(-1)
    np.testing.assert_allclose(C, raw / raw.max(), atol=1e-14)
    assert C.max() == 1.0


def test_cost_cosine():
    e = np.eye(2)
    np.testing.assert_allclose(cost_cosine(PointCloud(e), PointCloud(e)), [[0, 1], [1, 0]], atol=1e-15)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 4))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    C = cost_cosine(PointCloud(X), PointCloud(X))
    assert C.min() == 0.0 and C.max() == 1.0
    half = cost_cosine(PointCloud(X), PointCloud(X), normalization="half")
    np.testing.assert_allclose(half, (1 - X @ X.T) / 2, atol=1e-15)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_word_vectors(tmp_path):
    path = write(tmp_path, "v.vec", "2 3\na 1 0 0\nb 0 2 0\n")
    pc = load_word_vectors(path, 2)
    np.testing.assert_allclose(pc.points, [[1, 0, 0], [0, 1, 0]])
    assert pc.labels == ["a", "b"]
    with pytest.raises(VocabularyTooSmall):
        load_word_vectors(path, 3)


def test_load_word_vectors_errors(tmp_path):
    with pytest.raises(ZeroVector):
        load_word_vectors(write(tmp_path, "z.vec", "1 2\nz 0 0\n"), 1)
    with pytest.raises(MalformedLine):
        load_word_vectors(write(tmp_path, "m.vec", "1 2\nm 0\n"), 1)
    with pytest.raises(MalformedLine):
        load_word_vectors(write(tmp_path, "n.vec", "1 2\nm 0 x\n"), 1)


def test_load_word_vectors_duplicate(tmp_path):
    path = write(tmp_path, "d.vec", "3 2\na 1 0\na 0 1\nb 0 1\n")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        pc = load_word_vectors(path, 2)
    assert any(issubclass(w.category, DuplicateWord) for w in rec)
    assert pc.labels == ["a", "b"]
    np.testing.assert_allclose(pc.points[0], [1, 0])


def test_load_dictionary(tmp_path):
    path = write(tmp_path, "d.txt", "cat chat\ndog chien\ncat chat\nbird oiseau\ncat minou\n")
    d = load_dictionary(path, ["cat", "dog"], ["chat", "chien", "minou"])
    assert d.pairs == [(0, 0), (1, 1), (0, 2)]
    assert d.by_source() == {0: [0, 2], 1: [1]}
    empty = load_dictionary(write(tmp_path, "e.txt", ""), ["a"], ["b"])
    assert len(empty) == 0 and isinstance(empty, BilingualDictionary)
    with pytest.raises(MalformedLine):
        load_dictionary(write(tmp_path, "bad.txt", "a b c\n"), ["a"], ["b"])


def test_file_digest(tmp_path):
    path = write(tmp_path, "h.txt", "abc")
    assert file_digest(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
