"""Scene configuration: serialization, validation, and mesh construction."""
import numpy as np
import pytest

from casibem.bem import QuadConfig
from casibem.scene import ConfigError, ObjectSpec, SceneConfig, \
    _rotation_matrix


def two_sphere_config(**overrides):
    kw = dict(
        objects=[
            {"object_id": "a", "shape": "sphere", "radius": 1.0,
             "refinement": 0},
            {"object_id": "b", "shape": "sphere", "radius": 1.0,
             "refinement": 0, "translate": [3.0, 0.0, 0.0]},
        ],
        measured="a",
        kappa_M=8,
    )
    kw.update(overrides)
    return SceneConfig(**kw)


def test_json_roundtrip(tmp_path):
    cfg = two_sphere_config(quad_overrides={"far_degree": 4})
    text = cfg.to_json()
    back = SceneConfig.from_json(text)
    assert back.to_dict() == cfg.to_dict()
    path = tmp_path / "scene.json"
    path.write_text(text)
    assert SceneConfig.load(path).to_dict() == cfg.to_dict()


def test_config_hash_tracks_content():
    a = two_sphere_config()
    b = two_sphere_config()
    assert a.config_hash() == b.config_hash()
    assert len(a.config_hash()) == 12
    c = two_sphere_config(kappa_M=16)
    assert c.config_hash() != a.config_hash()


def test_from_json_rejects_garbage():
    with pytest.raises(ConfigError):
        SceneConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        SceneConfig.from_json('{"objects": [], "bogus_key": 1}')


def test_validation_errors():
    with pytest.raises(ConfigError):
        SceneConfig(objects=[]).validate()
    cfg = two_sphere_config()
    cfg.objects[1].object_id = "a"
    with pytest.raises(ConfigError):
        cfg.validate()
    with pytest.raises(ConfigError):
        two_sphere_config(measured="nope").validate()
    with pytest.raises(ConfigError):
        two_sphere_config(epsilon_factor=0.0).validate()
    with pytest.raises(ConfigError):
        two_sphere_config(kappa_M=1).validate()
    with pytest.raises(ConfigError):
        two_sphere_config(kappa0=-2.0).validate()
    with pytest.raises(ConfigError):
        two_sphere_config(mode="banana").validate()
    bad = two_sphere_config()
    bad.objects[0].radius = -1.0
    with pytest.raises(ConfigError):
        bad.validate()


def test_build_merges_and_tags():
    cfg = two_sphere_config()
    mesh, names = cfg.build()
    assert names == ["a", "b"]
    assert mesh.num_triangles == 40
    assert set(np.unique(mesh.object_id)) == {0, 1}
    # second object translated +x
    cx = mesh.centroids[mesh.object_id == 1].mean(axis=0)
    np.testing.assert_allclose(cx, [3.0, 0.0, 0.0], atol=1e-12)


def test_object_transform_order():
    # scale then rotate then translate
    spec = ObjectSpec(object_id="c", shape="capsule", radius=0.5, length=3.0,
                      refinement=8, rotate_axis=[0.0, 1.0, 0.0],
                      rotate_deg=90.0, scale=2.0,
                      translate=[0.0, 0.0, 5.0])
    m = spec.build()
    lo, hi = m.bounding_box()
    # the capsule axis (z, length 3 scaled to 6) rotates onto x; the
    # volume-matched faceting pushes vertices ~5% past the nominal radius
    np.testing.assert_allclose(hi[0] - lo[0], 6.0, rtol=0.06)
    np.testing.assert_allclose(hi[2] - lo[2], 2.0, rtol=0.06)
    assert hi[0] - lo[0] > 2.5 * (hi[2] - lo[2])
    np.testing.assert_allclose(0.5 * (lo + hi), [0.0, 0.0, 5.0], atol=1e-9)


def test_rotation_matrix_properties():
    R = _rotation_matrix([1.0, 2.0, 3.0], 37.0)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(np.linalg.det(R), 1.0, rtol=1e-14)
    # axis is fixed
    axis = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)
    np.testing.assert_allclose(R @ axis, axis, atol=1e-14)
    with pytest.raises(ConfigError):
        _rotation_matrix([0.0, 0.0, 0.0], 10.0)


def test_mesh_shape_needs_path():
    with pytest.raises(ConfigError):
        ObjectSpec(object_id="m", shape="mesh").build()
    with pytest.raises(ConfigError):
        ObjectSpec(object_id="m", shape="torus").build()


def test_quad_overrides():
    cfg = two_sphere_config(quad_overrides={"far_degree": 4,
                                            "singular_order": 10})
    q = cfg.quad_config()
    assert q == QuadConfig(far_degree=4, singular_order=10)
    assert two_sphere_config().quad_config() == QuadConfig()
