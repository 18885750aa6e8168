"""The policy network: task tokenizers around a shared causal transformer.

Dataflow per timestep window: per-joint observation rows and the previous
action are embedded by task-specific affine layers, fused over the joint
axis by a shared morphology self-attention encoder, pooled to one state
token and one action token per step, and fed (after a morphology prompt
token and a learned BOS) through a causal pre-LN transformer over time.
Decoder outputs are refined by a residual cross term against the raw
input latents, then projected back to task-native action/state spaces.

Sequence layout and output alignment, with left padding for short windows:

    [prompt] [pad ... pad] [BOS] s_0 a_0 s_1 a_1 ... s_r a_r
                            |     |   |
                            v     v   v
                          s^_0   a^_0 s^_1 ...

so the token before each s_k predicts s_k (and carries that step's value
estimate), and each s_k token emits the action for step k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import (Mlp, ParameterStore, Tensor, affine, attention, clip,
                        concat, layer_norm, relu, reshape, sum_, take)
from .morphology import PROMPT_SCALE, MorphologySpec

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class ModelConfig:
    e: int = 128          # embedding width
    heads: int = 2
    attn_dim: int = 128   # q/k projection width inside attention
    n_blocks: int = 2
    ffn_mult: int = 2
    t_w: int = 10         # window length in timesteps
    t_cap: int = 1000     # timestep embedding capacity
    k_cap: int = 16       # joint position embedding capacity

    def validate(self):
        if self.attn_dim % self.heads or self.e % self.heads:
            raise ValueError("attn_dim and e must divide by heads")
        return self


@dataclass
class PolicyOutput:
    """Per-timestep heads in the task's native spaces."""
    action_mean: np.ndarray     # (n_a,)
    action_log_std: np.ndarray  # (n_a,)
    predicted_state: np.ndarray  # (n_s,) guess at this step's state
    value: float                 # state-value estimate for this step


class OdmModel:
    """Parameter owner plus every forward path, batched over windows."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg.validate()
        self.store = ParameterStore(np.random.default_rng(seed))
        self.specs: dict = {}
        self.active_task: str = ""
        self._build_shared()

    # --- parameters -------------------------------------------------------
    def _build_shared(self):
        s, c = self.store, self.cfg
        s.table("shared.bos", 1, c.e, scale=0.02)
        s.table("shared.joint_pos", c.k_cap, c.e, scale=0.0)
        s.table("shared.time_pos", c.t_cap, c.e, scale=0.02)
        s.affine("shared.time_merge", 2 * c.e, c.e)
        # morphology encoder: q/k into attn_dim, v stays at e, residual add
        s.affine("shared.morph.q", c.e, c.attn_dim, bias=False)
        s.affine("shared.morph.k", c.e, c.attn_dim, bias=False)
        s.affine("shared.morph.v", c.e, c.e, bias=False)
        self.prompt_mlp = Mlp(s, "shared.prompt", (4, c.e, c.e))
        for i in range(c.n_blocks):
            p = f"shared.blk{i}"
            s.ln(f"{p}.ln1", c.e)
            s.affine(f"{p}.q", c.e, c.attn_dim, bias=False)
            s.affine(f"{p}.k", c.e, c.attn_dim, bias=False)
            s.affine(f"{p}.v", c.e, c.e, bias=False)
            s.affine(f"{p}.o", c.e, c.e, bias=False)
            s.ln(f"{p}.ln2", c.e)
            s.affine(f"{p}.f1", c.e, c.ffn_mult * c.e)
            s.affine(f"{p}.f2", c.ffn_mult * c.e, c.e)
        s.ln("shared.ln_f", c.e)
        s.affine("shared.refine.a", c.e, c.e, bias=False)
        s.affine("shared.refine.s", c.e, c.e, bias=False)

    def register_task(self, spec: MorphologySpec) -> None:
        """Create this body's tokenizer/projector group, initially frozen."""
        if spec.name in self.specs:
            raise ValueError(f"task '{spec.name}' already registered")
        if spec.K > self.cfg.k_cap:
            raise ValueError(f"K={spec.K} exceeds capacity {self.cfg.k_cap}")
        s, e = self.store, self.cfg.e
        p = f"task.{spec.name}"
        s.affine(f"{p}.embed_o", spec.n, e)
        s.affine(f"{p}.embed_x", spec.x, e)
        s.affine(f"{p}.embed_a", spec.m, e)
        s.affine(f"{p}.embed_s", (spec.K + 1) * e, e)
        s.affine(f"{p}.proj_s", e, spec.n_s)
        s.affine(f"{p}.proj_a", e, spec.n_a)
        s.affine(f"{p}.proj_v", e, 1)
        # sigma ~ 0.37 of the torque range; unit spread buries the policy
        # mean under exploration noise on bounded-action bodies
        s.vector(f"{p}.log_std", spec.n_a, fill=-1.0)
        s.freeze(p)
        self.specs[spec.name] = spec

    def activate(self, name: str) -> None:
        """Exactly one task trainable at a time; the rest stay frozen."""
        if name not in self.specs:
            raise KeyError(f"unknown task '{name}'")
        for other in self.specs:
            self.store.freeze(f"task.{other}")
        self.store.unfreeze(f"task.{name}")
        self.active_task = name

    def spec(self, name: str = None) -> MorphologySpec:
        return self.specs[name or self.active_task]

    # --- stage 1: tokenize --------------------------------------------------
    def tokenize_state(self, padded, ext, task: str):
        """Per-joint embeddings (..., K, e) and ext embedding (..., e).

        `padded` is (..., K, n), `ext` (..., x). Masked slots are forced to
        zero here, so whatever garbage they hold cannot reach any output.
        """
        spec = self.specs[task]
        padded = np.asarray(padded, float)
        ext = np.asarray(ext, float)
        if padded.shape[-2:] != (spec.K, spec.n) or ext.shape[-1] != spec.x:
            raise ValueError(f"shape mismatch for task '{task}': "
                             f"{padded.shape} / {ext.shape}")
        padded = padded * spec.state_mask
        p = f"task.{task}"
        jl = affine(Tensor(padded), self.store[f"{p}.embed_o.w"],
                    self.store[f"{p}.embed_o.b"])
        xe = affine(Tensor(ext), self.store[f"{p}.embed_x.w"],
                    self.store[f"{p}.embed_x.b"])
        return jl, xe

    def tokenize_action(self, padded, task: str):
        spec = self.specs[task]
        padded = np.asarray(padded, float)
        if padded.shape[-2:] != (spec.K, spec.m):
            raise ValueError(f"action shape mismatch for '{task}'")
        padded = padded * spec.action_mask
        p = f"task.{task}"
        return affine(Tensor(padded), self.store[f"{p}.embed_a.w"],
                      self.store[f"{p}.embed_a.b"])

    # --- stage 2: fuse over the joint axis -----------------------------------
    def morph_encode(self, joint_latents, joint_mask: np.ndarray):
        """Residual self-attention across joints with position lookups added.

        joint_mask (K,) excludes absent joints as keys; an absent joint only
        sees itself, and its output is ignored downstream.
        """
        K = joint_latents.shape[-2]
        joint_mask = np.asarray(joint_mask, bool)
        if not joint_mask.any():
            raise ValueError("all joints masked")
        pos = take(self.store["shared.joint_pos"], np.arange(K))
        h = joint_latents + pos
        q = affine(h, self.store["shared.morph.q.w"])
        k = affine(h, self.store["shared.morph.k.w"])
        v = affine(h, self.store["shared.morph.v.w"])
        mask = np.broadcast_to(joint_mask, (K, K)) | np.eye(K, dtype=bool)
        return h + attention(q, k, v, mask, heads=self.cfg.heads)

    # --- stage 3: pool to single tokens -----------------------------------
    def pool_state(self, joint_latents, ext_latent, task: str):
        """Flatten K joint latents, append the ext latent, fuse to width e."""
        spec = self.specs[task]
        lead = joint_latents.shape[:-2]
        flat = reshape(joint_latents, lead + (spec.K * self.cfg.e,))
        p = f"task.{task}"
        return affine(concat([flat, ext_latent], axis=-1),
                      self.store[f"{p}.embed_s.w"], self.store[f"{p}.embed_s.b"])

    def pool_action(self, action_joint_latents, joint_mask: np.ndarray):
        """Mean of the present joints' action latents."""
        joint_mask = np.asarray(joint_mask, bool)
        if not joint_mask.any():
            raise ValueError("all joints masked")
        w = joint_mask.astype(float) / joint_mask.sum()
        return sum_(action_joint_latents * w[:, None], axis=-2)

    # --- stage 4: morphology prompt ------------------------------------------
    def build_prompt(self, spec: MorphologySpec):
        raw = np.array([spec.K, spec.n, spec.m, spec.x], float) / PROMPT_SCALE
        return self.prompt_mlp(Tensor(raw))

    # --- stage 5: causal transformer over time ------------------------------
    def causal_forward(self, tokens, timestep_ids, pad_mask, prompt=None):
        """Decoder over a (B, L, e) interleaved sequence.

        timestep_ids (B, L) int, pad_mask (B, L) bool with True = padding
        (pads form a contiguous prefix after the optional prompt position).
        Output (B, L', e) where L' includes the prompt position when given.
        """
        cfg = self.cfg
        B, L, _ = tokens.shape
        if prompt is not None:
            tokens = concat([reshape(prompt, (1, 1, cfg.e)) + np.zeros((B, 1, cfg.e)),
                             tokens], axis=-2)
            timestep_ids = np.concatenate(
                [np.zeros((B, 1), np.intp), timestep_ids], axis=1)
            pad_mask = np.concatenate(
                [np.zeros((B, 1), bool), pad_mask], axis=1)
            L += 1
        if np.any(timestep_ids >= cfg.t_cap):
            raise ValueError(f"timestep id beyond capacity {cfg.t_cap}")
        tpos = take(self.store["shared.time_pos"], timestep_ids.reshape(-1))
        tpos = reshape(tpos, (B, L, cfg.e))
        h = affine(concat([tokens, tpos], axis=-1),
                   self.store["shared.time_merge.w"],
                   self.store["shared.time_merge.b"])
        # causal and pad-aware: queries never see pad keys; pad rows keep a
        # self-edge so every softmax row stays valid (their outputs are unused)
        causal = np.tril(np.ones((L, L), bool))
        key_ok = causal & ~pad_mask[:, None, :]
        mask = key_ok | np.eye(L, dtype=bool)
        for i in range(cfg.n_blocks):
            p = f"shared.blk{i}"
            hn = layer_norm(h, self.store[f"{p}.ln1.g"], self.store[f"{p}.ln1.b"])
            att = attention(affine(hn, self.store[f"{p}.q.w"]),
                            affine(hn, self.store[f"{p}.k.w"]),
                            affine(hn, self.store[f"{p}.v.w"]),
                            mask, heads=cfg.heads)
            h = h + affine(att, self.store[f"{p}.o.w"])
            hn = layer_norm(h, self.store[f"{p}.ln2.g"], self.store[f"{p}.ln2.b"])
            f = affine(relu(affine(hn, self.store[f"{p}.f1.w"],
                                   self.store[f"{p}.f1.b"])),
                       self.store[f"{p}.f2.w"], self.store[f"{p}.f2.b"])
            h = h + f
        return layer_norm(h, self.store["shared.ln_f.g"], self.store["shared.ln_f.b"])

    # --- stage 6: instant-impact refinement -----------------------------------
    def cross_refine(self, a_hat, s_pooled, s_hat, a_prev_pooled):
        """Residual attention with one key collapses to a value projection."""
        a_out = a_hat + affine(s_pooled, self.store["shared.refine.a.w"])
        s_out = s_hat + affine(a_prev_pooled, self.store["shared.refine.s.w"])
        return a_out, s_out

    # --- stage 7: heads -------------------------------------------------------
    def project_heads(self, a_hat, s_hat, task: str):
        p = f"task.{task}"
        action_mean = affine(a_hat, self.store[f"{p}.proj_a.w"],
                             self.store[f"{p}.proj_a.b"])
        predicted_state = affine(s_hat, self.store[f"{p}.proj_s.w"],
                                 self.store[f"{p}.proj_s.b"])
        value = affine(s_hat, self.store[f"{p}.proj_v.w"],
                       self.store[f"{p}.proj_v.b"])
        log_std = clip(self.store[f"{p}.log_std"], LOG_STD_MIN, LOG_STD_MAX)
        return action_mean, predicted_state, value, log_std

    # --- full pipeline ----------------------------------------------------------
    def forward_batch(self, states, actions, timesteps, n_pad, task: str,
                      use_prompt: bool = True):
        """Batched window forward.

        states (B, T, n_s), actions (B, T, n_a), timesteps (B, T) absolute
        env steps, n_pad (B,) leading pad counts per window (pad steps hold
        zeros). Returns refined latents:
          a_hat (B, T, e): action latent for step t (from the s_t token)
          s_hat (B, T, e): predicted-state latent for step t (from the token
                           before s_t, i.e. BOS or a_{t-1})
          tail  (B, e):    prediction of the state after the window, from the
                           final action token (value bootstrapping)
        Padded rows of a_hat/s_hat carry garbage; callers must mask them.
        """
        cfg = self.cfg
        spec = self.specs[task]
        states = np.asarray(states, float)
        actions = np.asarray(actions, float)
        timesteps = np.asarray(timesteps, np.intp)
        n_pad = np.asarray(n_pad, np.intp)
        B, T = states.shape[:2]
        if T > cfg.t_w:
            raise ValueError(f"window of {T} steps exceeds T_w={cfg.t_w}")
        if states.shape[2] != spec.n_s or actions.shape[2] != spec.n_a:
            raise ValueError(f"window dims do not match task '{task}'")

        # vectorized padded layout: grid (B, T, K, n) + ext (B, T, x)
        nj = spec.n_s - spec.x
        grid = np.zeros((B, T, spec.K, spec.n))
        grid[..., spec.state_mask] = states[..., :nj]
        ext = states[..., nj:]
        agrid = np.zeros((B, T, spec.K, spec.m))
        agrid[..., spec.action_mask] = actions

        jl, xe = self.tokenize_state(grid, ext, task)
        jl = self.morph_encode(jl, spec.joint_mask)
        s_pool = self.pool_state(jl, xe, task)              # (B, T, e)
        al = self.tokenize_action(agrid, task)
        a_pool = self.pool_action(al, spec.joint_mask)      # (B, T, e)

        # interleave: BOS s_0 a_0 ... s_{T-1} a_{T-1}, pads as a prefix
        e = cfg.e
        bos = reshape(take(self.store["shared.bos"], np.array([0])), (1, 1, e))
        bos = bos + np.zeros((B, 1, e))
        sa = reshape(concat([reshape(s_pool, (B, T, 1, e)),
                             reshape(a_pool, (B, T, 1, e))], axis=-2),
                     (B, 2 * T, e))
        steps = np.arange(T)
        pad_step = steps[None, :] < n_pad[:, None]          # (B, T) padded steps
        # zero pad-step tokens so stale values cannot leak through residuals
        sa = sa * np.repeat(~pad_step, 2, axis=1)[:, :, None].astype(float)
        tokens = concat([bos, sa], axis=-2)                  # (B, 1+2T, e)

        # BOS carries the first real step's timestep, pads carry id 0
        bos_tid = timesteps[np.arange(B), np.minimum(n_pad, T - 1)]
        tids = np.repeat(timesteps, 2, axis=1)
        tids = np.concatenate([bos_tid[:, None], tids], axis=1)
        pad_tok = np.concatenate([np.zeros((B, 1), bool),
                                  np.repeat(pad_step, 2, axis=1)], axis=1)
        tids = np.where(pad_tok, 0, tids)

        prompt = self.build_prompt(spec) if use_prompt else None
        out = self.causal_forward(tokens, tids, pad_tok, prompt=prompt)
        off = 1 if use_prompt else 0

        # gather per-step outputs: s_k token at off+1+2k, predecessor at off+2k
        s_tok = off + 1 + 2 * steps
        pre_tok = off + 2 * steps
        a_hat = take(out, s_tok, axis=-2)                    # (B, T, e)
        s_hat = take(out, pre_tok, axis=-2)

        # each window's first real step is preceded by pads, not by BOS; its
        # prediction must come from the BOS output and its a_prev is the BOS
        first = (steps[None, :] == n_pad[:, None])[:, :, None]  # (B, T, 1)
        bos_out = take(out, np.array([off]), axis=-2)         # (B, 1, e)
        s_hat = s_hat * ~first + bos_out * first

        a_prev = take(a_pool, steps - 1, axis=-2)             # a_{t-1}, junk at t=0
        keep = (~first).astype(float) * (steps[None, :, None] > 0)
        a_prev = a_prev * keep + bos * first
        a_hat, s_hat = self.cross_refine(a_hat, s_pool, s_hat, a_prev)

        # trailing prediction: the final action token's output is the latent
        # of the state after the window, used to bootstrap values
        tail = take(out, np.array([off + 2 * T]), axis=-2)    # (B, 1, e)
        a_last = take(a_pool, np.array([T - 1]), axis=-2)
        tail = reshape(tail + affine(a_last, self.store["shared.refine.s.w"]),
                       (B, e))
        return a_hat, s_hat, tail

    def forward_window(self, window, task: str, use_prompt: bool = True):
        """Single-window convenience wrapper -> list of PolicyOutput.

        `window` needs .states (T, n_s), .actions (T, n_a), .timesteps (T,)
        and .n_pad. Returns one PolicyOutput per real (unpadded) step.
        """
        a_hat, s_hat, _ = self.forward_batch(
            window.states[None], window.actions[None], window.timesteps[None],
            np.array([window.n_pad]), task, use_prompt)
        am, ps, val, ls = self.project_heads(a_hat, s_hat, task)
        outs = []
        T = window.states.shape[0]
        for t in range(int(window.n_pad), T):
            outs.append(PolicyOutput(
                action_mean=am.data[0, t].copy(),
                action_log_std=ls.data.copy(),
                predicted_state=ps.data[0, t].copy(),
                value=float(val.data[0, t, 0])))
        return outs
