"""Forward simulation of the closed loop over a prediction window."""

from dataclasses import dataclass

import numpy as np

from apps.motors.model import rising_mask

from .model import PredictionState, difference, stack_states


@dataclass(frozen=True)
class RolloutResult:
    """States ``x_0 .. x_h`` plus the per-step signals that produced them."""

    states: PredictionState
    X_seq: np.ndarray
    u_0_seq: np.ndarray
    u_cmd_seq: np.ndarray
    u_act_seq: np.ndarray
    stage_costs: np.ndarray

    @property
    def horizon(self):
        return self.X_seq.shape[0]

    @property
    def cost(self):
        return float(np.sum(self.stage_costs))

    @property
    def delta_u(self):
        """``u_act,k - u_act,k-1`` for every step."""
        return self.u_act_seq - self.states.u_act[:-1]

    def rising(self):
        """Motor regime (rise/fall) chosen at each nominal step."""
        return rising_mask(self.states.u_act[:-1], self.u_cmd_seq)

    def candidate(self, index):
        """Member ``index`` of a rollout batched along the second axis."""
        return RolloutResult(
            states=self.states[:, index],
            X_seq=self.X_seq[:, index],
            u_0_seq=self.u_0_seq[:, index],
            u_cmd_seq=self.u_cmd_seq[:, index],
            u_act_seq=self.u_act_seq[:, index],
            stage_costs=self.stage_costs[:, index],
        )


def smoothness_cost(delta_u, weight):
    """``delta_u^T W delta_u`` for each row of ``delta_u``."""
    return np.einsum('...i,ij,...j->...', delta_u, weight, delta_u)


def rollout(start, X_seq, refs, model, weight, feedback=None):
    """Simulate ``len(X_seq)`` closed-loop steps from ``start``.

    ``refs`` is a stacked ReferencePoint with one entry per step. With
    ``feedback=(nominal, K)`` the applied shift is
    ``X_seq[k] + K[k] (x_k (-) nominal.states[k])``. ``X_seq`` may carry a
    batch axis, shape (h, B, 2), when ``start`` is batched to (B, ...).
    """
    X_seq = np.asarray(X_seq, dtype=float)
    horizon = X_seq.shape[0]
    states = [start]
    applied = np.empty_like(X_seq)
    u_0_seq = np.empty(X_seq.shape[:-1] + (model.alloc.A.shape[1],))
    u_cmd_seq = np.empty_like(u_0_seq)
    u_act_seq = np.empty_like(u_0_seq)

    state = start
    for k in range(horizon):
        X = X_seq[k]
        if feedback is not None:
            nominal, gains = feedback
            X = X + difference(state, nominal.states[k]) @ gains[k].T
        state, record = model.step(state, X, refs[k])
        applied[k] = X
        u_0_seq[k] = record.u_0
        u_cmd_seq[k] = record.u_cmd
        u_act_seq[k] = record.u_act
        states.append(state)

    previous = np.concatenate([start.u_act[None], u_act_seq[:-1]], axis=0)
    return RolloutResult(
        states=stack_states(states),
        X_seq=applied,
        u_0_seq=u_0_seq,
        u_cmd_seq=u_cmd_seq,
        u_act_seq=u_act_seq,
        stage_costs=smoothness_cost(u_act_seq - previous, weight),
    )


def rollout_steps(start, nominal, d, K, alphas, refs, model, weight):
    """Feedback rollouts ``nominal.X_seq + alpha d`` for every ``alpha`` in one batched pass."""
    alphas = np.asarray(alphas, dtype=float)
    batch = stack_states([start] * len(alphas))
    X_seq = nominal.X_seq[:, None, :] + alphas[None, :, None] * np.asarray(d)[:, None, :]
    result = rollout(batch, X_seq, refs, model, weight, feedback=(nominal, K))
    return [result.candidate(i) for i in range(len(alphas))]
