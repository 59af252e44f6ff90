"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from blindbeam import agent as A
from blindbeam import nn


def ddpg_gradient_errors(kind: str, seed: int, hidden=(12, 10), n_ue=2, n_bs=3, batch=5, n_samples=8):
    """Relative errors of the critic (MSBE) and actor (-mean Q) gradients vs central differences."""
    rng = np.random.default_rng(seed)
    cfg = A.TrainConfig(hidden=hidden, batch_n=batch, buffer_size=batch)
    ag = A.DDPGAgent(kind, n_ue, n_bs, cfg, seed=seed)
    s = rng.normal(size=(batch, ag.obs_dim))
    a = rng.uniform(-1, 1, size=(batch, ag.actor.out_dim))
    y = rng.normal(size=batch)

    g_c, _ = A.critic_grads(ag.critic, s, a, y)
    fd_c = nn.numeric_grads(lambda: A.msbe(y, ag.critic.forward(s, a)[0]), ag.critic.params(),
                            h=1e-7, n_samples=n_samples, rng=rng)
    err_c = nn.compare_grads(g_c, fd_c)

    g_a, _ = A.actor_grads(ag.actor, ag.critic, s)
    fd_a = nn.numeric_grads(lambda: -float(np.mean(ag.critic.forward(s, ag.actor.forward(s)[0])[0])),
                            ag.actor.params(), h=1e-7, n_samples=n_samples, rng=rng)
    err_a = nn.compare_grads(g_a, fd_a)
    return err_c, err_a


def hybrid_forward_by_heads(actor: A.HybridActor, x: np.ndarray) -> np.ndarray:
    """Per-UE evaluation through the head layer views, one sample and one UE at a time."""
    rows = []
    for xi in np.atleast_2d(x):
        feat, _ = nn.forward(actor.extractor, xi)
        out = []
        for u in range(actor.n_ue):
            scores = None
            if actor.predict_bs:
                scores, _ = nn.forward([actor.bs_heads[u]], feat)
                out.append(scores)
            if actor.predict_angles:
                inp = feat if scores is None else np.concatenate([feat, scores])
                ang, _ = nn.forward([actor.angle_heads[u]], inp)
                out.append(ang)
        rows.append(np.concatenate(out))
    return np.array(rows)
