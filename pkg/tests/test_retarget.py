import numpy as np
import pytest

from gmp.dataset import MotionClip, foot_states, synth_gait
from gmp.model import default_model, keypoints_local_batch
from gmp.retarget import (HumanMotion, LIMB_SITE_NAMES, RetargetError, RetargetProblem,
                          RetargetWeights, foot_loss, human_from_clip, retarget, smooth_loss,
                          total_loss, vec_loss)
from gmp.rotations import matrix_to_quat, so3_exp_batch


@pytest.fixture(scope="module")
def model():
    return default_model()


def standing_clip(model, T=12, fps=50.0):
    base_pos = np.tile([0.0, 0.0, model.rest_base_height], (T, 1))
    base_quat = np.tile([1.0, 0.0, 0.0, 0.0], (T, 1))
    return MotionClip(fps=fps, base_pos=base_pos, base_quat=base_quat,
                      q=np.zeros((T, 21)), contacts=np.ones((T, 2), dtype=bool))


# ---------------------------------------------------------------------------
# loss term oracles


def test_vec_loss_values():
    v = np.zeros((1, 8, 3))
    v[..., 0] = 1.0
    assert vec_loss(v, v) == 0.0
    flipped = v.copy()
    flipped[0, 0] *= -1.0  # one opposite pair: |x - (-x)|^2 = 4
    assert np.isclose(vec_loss(v, flipped), 4.0, atol=1e-15)


def test_vec_loss_normalizes_inputs():
    a = np.zeros((1, 8, 3))
    a[..., 0] = 2.0
    b = np.zeros((1, 8, 3))
    b[..., 0] = 0.5
    assert np.isclose(vec_loss(a, b), 0.0, atol=1e-15)
    c = np.zeros((1, 8, 3))
    c[..., 1] = 3.0
    # orthogonal unit vectors differ by sqrt(2) in every pair
    assert np.isclose(vec_loss(a, c), 8 * 2.0, atol=1e-12)


def test_vec_loss_validates_shape():
    with pytest.raises(RetargetError):
        vec_loss(np.zeros((1, 7, 3)), np.zeros((1, 7, 3)))


def test_foot_loss_values(model):
    from gmp.dataset import FootState
    states = [(FootState(0.1, np.array([0.2, 0.0, 0.0])), FootState(5.0, np.array([9.0, 0.0, 0.0])))]
    # only the in-contact left foot counts: 0.1^2 + 0.2^2
    assert np.isclose(foot_loss([[True, False]], states), 0.05, atol=1e-15)
    assert foot_loss([[False, False]], states) == 0.0
    both = foot_loss([[True, True]], states)
    assert np.isclose(both, 0.05 + 25.0 + 81.0, atol=1e-12)


def test_smooth_loss_values():
    assert smooth_loss(np.zeros(21), np.zeros(21)) == 0.0
    assert np.isclose(smooth_loss(np.zeros(21), np.ones(21)), 21.0, atol=1e-15)
    with pytest.raises(RetargetError):
        smooth_loss(np.zeros(3), np.zeros(4))


def test_weights_validation():
    with pytest.raises(RetargetError):
        RetargetWeights(alpha=-1.0)
    w = RetargetWeights()
    assert (w.alpha, w.beta, w.gamma) == (1.0, 1000.0, 100.0)


# ---------------------------------------------------------------------------
# source construction


def test_human_from_clip_requires_contacts(model):
    clip = standing_clip(model)
    clip.contacts = None
    with pytest.raises(RetargetError, match="contact"):
        human_from_clip(clip, model)


def test_human_from_clip_scaling(model):
    src1 = human_from_clip(standing_clip(model), model)
    src2 = human_from_clip(standing_clip(model), model, scale=1.1)
    assert np.allclose(src2.base_pos, 1.1 * src1.base_pos, atol=1e-15)
    assert np.allclose(src2.sites["l_ankle"], 1.1 * src1.sites["l_ankle"], atol=1e-15)
    assert np.isclose(src2.standing_height, 1.1 * model.standing_height)


def test_human_motion_validates_sites(model):
    src = human_from_clip(standing_clip(model), model)
    sites = dict(src.sites)
    del sites["l_wrist"]
    with pytest.raises(RetargetError, match="l_wrist"):
        HumanMotion(fps=50.0, sites=sites, base_pos=src.base_pos,
                    base_quat=src.base_quat, contacts=src.contacts)


def test_degenerate_source_names_the_limb(model):
    T = 3
    sites = {n: np.zeros((T, 3)) for n in LIMB_SITE_NAMES}  # all sites coincide
    src = HumanMotion(fps=50.0, sites=sites, base_pos=np.zeros((T, 3)),
                      base_quat=np.tile([1.0, 0, 0, 0], (T, 1)),
                      contacts=np.zeros((T, 2), dtype=bool))
    with pytest.raises(RetargetError, match="l_shoulder->l_elbow"):
        RetargetProblem(src, model)


# ---------------------------------------------------------------------------
# total loss


def test_total_loss_combines_parts(model):
    clip = synth_gait(0.8, duration=0.5, seed=1, model=model)
    problem = RetargetProblem(human_from_clip(clip, model), model)
    variables = problem.init_variables()
    total, parts, grads = total_loss(problem, variables)
    w = problem.weights
    assert np.isclose(total, w.alpha * parts["vec"] + w.beta * parts["foot"]
                      + w.gamma * parts["smo"], atol=1e-12)
    assert set(grads) == {"q", "base_pos", "delta"}
    t2, p2, _ = total_loss(problem, variables, want_grad=False)
    assert t2 == total and p2 == parts


def test_total_loss_foot_term_matches_foot_states(model):
    # the foot term equals foot_loss() evaluated on the clip the variables imply
    clip = synth_gait(0.6, duration=0.4, seed=2, model=model)
    problem = RetargetProblem(human_from_clip(clip, model), model)
    variables = problem.init_variables()
    rng = np.random.default_rng(3)
    variables["q"] += rng.normal(scale=0.05, size=variables["q"].shape)
    variables["delta"] += rng.normal(scale=0.02, size=variables["delta"].shape)
    _, parts, _ = total_loss(problem, variables, want_grad=False)

    R = so3_exp_batch(variables["delta"]) @ problem.init_rotations
    quat = np.stack([matrix_to_quat(Rt) for Rt in R])
    implied = MotionClip(fps=clip.fps, base_pos=variables["base_pos"],
                         base_quat=quat, q=variables["q"])
    oracle = foot_loss(clip.contacts, foot_states(implied, model))
    assert np.isclose(parts["foot"], oracle, atol=1e-10)


def test_total_loss_smoothness_term(model):
    clip = synth_gait(0.6, duration=0.3, seed=4, model=model)
    problem = RetargetProblem(human_from_clip(clip, model), model)
    variables = problem.init_variables()
    rng = np.random.default_rng(5)
    variables["q"] = rng.normal(scale=0.1, size=variables["q"].shape)
    _, parts, _ = total_loss(problem, variables, want_grad=False)
    qdot = np.diff(variables["q"], axis=0) * clip.fps
    oracle = sum(smooth_loss(qdot[t], qdot[t + 1]) for t in range(len(qdot) - 1))
    assert np.isclose(parts["smo"], oracle, atol=1e-9)


def test_total_loss_rejects_non_finite(model):
    clip = synth_gait(0.5, duration=0.3, seed=6, model=model)
    problem = RetargetProblem(human_from_clip(clip, model), model)
    variables = problem.init_variables()
    variables["q"][0, 0] = np.nan
    with pytest.raises(RetargetError, match="non-finite"):
        total_loss(problem, variables)


def test_gradients_match_finite_differences(model):
    clip = synth_gait(0.9, duration=3 / 50.0, seed=7, model=model)  # T = 3
    problem = RetargetProblem(human_from_clip(clip, model), model)
    variables = problem.init_variables()
    rng = np.random.default_rng(8)
    variables["q"] += rng.normal(scale=0.05, size=variables["q"].shape)
    variables["delta"] += rng.normal(scale=0.05, size=variables["delta"].shape)
    _, _, grads = total_loss(problem, variables)

    h = 1e-6
    for key in ("q", "base_pos", "delta"):
        flat = variables[key].reshape(-1)
        an, fd = [], []
        for idx in rng.integers(0, flat.size, 8):
            old = flat[idx]
            flat[idx] = old + h
            up = total_loss(problem, variables, want_grad=False)[0]
            flat[idx] = old - h
            down = total_loss(problem, variables, want_grad=False)[0]
            flat[idx] = old
            fd.append((up - down) / (2 * h))
            an.append(grads[key].reshape(-1)[idx])
        an, fd = np.array(an), np.array(fd)
        assert np.linalg.norm(an - fd) < 1e-4 * max(1e-8, np.linalg.norm(fd)), key


# ---------------------------------------------------------------------------
# optimization


def test_standing_source_is_a_fixed_point(model):
    # a resting robot as its own source: the initialization is already optimal
    problem = RetargetProblem(human_from_clip(standing_clip(model), model), model)
    total0, _, _ = total_loss(problem, problem.init_variables(), want_grad=False)
    assert total0 < 1e-18
    result = retarget(problem, max_iters=10, log_every=5)
    assert result.final_loss < 1e-18
    assert np.abs(result.clip.q).max() < 1e-9


def test_retarget_reduces_loss_on_walk(model):
    clip = synth_gait(1.0, duration=0.8, seed=9, model=model)
    problem = RetargetProblem(human_from_clip(clip, model, scale=1.1), model)
    init, _, _ = total_loss(problem, problem.init_variables(), want_grad=False)
    result = retarget(problem, max_iters=600)
    assert result.final_loss < 0.01 * init
    assert result.trace[0]["total"] >= result.trace[-1]["total"]
    assert len(result.clip) == len(clip)
    # optimized contact feet stay near the ground
    heights = np.array([[ls.height, rs.height]
                        for ls, rs in foot_states(result.clip, model)])
    assert np.abs(heights[clip.contacts]).max() < 0.03


def test_retarget_is_deterministic(model):
    clip = synth_gait(0.7, duration=0.4, seed=10, model=model)
    problem = RetargetProblem(human_from_clip(clip, model), model)
    a = retarget(problem, max_iters=50)
    b = retarget(problem, max_iters=50)
    assert a.final_loss == b.final_loss
    assert np.array_equal(a.clip.q, b.clip.q)


def test_retarget_respects_joint_limits(model):
    clip = synth_gait(1.3, duration=0.4, seed=11, model=model)
    problem = RetargetProblem(human_from_clip(clip, model, scale=0.9), model)
    result = retarget(problem, max_iters=60)
    assert (result.clip.q >= model.lower_limits - 1e-12).all()
    assert (result.clip.q <= model.upper_limits + 1e-12).all()
