"""The differentiable model zoo and its FLOPs cost model.

Four model kinds, all float64 and fully deterministic given their seed:

* ``QuadraticModel``    -- independent quadratic blocks, closed-form gradients.
* ``RosenbrockModel``   -- the classic banana valley, two 1-d tensors.
* ``MLPModel``          -- dense tanh stack for the synthetic classification task.
* ``TinyAttentionLM``   -- single-head causal attention + MLP blocks, byte-level
                           next-token loss.

Layers are indexed from the model output: layer 0 is output-nearest. A
truncated backward propagates activation gradients from the loss down
through every layer up to and including the deepest layer that contains a
requested tensor, and computes weight gradients only for requested tensors.

FLOPs convention: one multiply-add counts as 2 FLOPs, so a (m,k)@(k,n)
matmul costs 2*m*k*n. Elementwise work (tanh, softmax, masking, scaling)
is not counted. Non-matmul gradient reductions (bias sums, embedding
scatter-adds) are charged one FLOP per touched element. Activation
propagation through a layer is charged whenever the layer is traversed,
including the deepest traversed layer, so the cost of a full backward
equals the sum of all per-tensor entries exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import Batch, ConfigurationError, NumericOverflowError, ParamTensor, Role

MODEL_KINDS = ("quadratic", "rosenbrock", "mlp", "attention_lm")


@dataclass
class CostEntry:
    name: str
    layer_index: int
    grad_flops: int   # weight-gradient cost of this tensor
    prop_flops: int   # activation propagation through this tensor's layer (on the layer's first tensor, 0 on the rest)
    fwd_flops: int


class CostModel:
    """Per-tensor backward/forward FLOPs, ordered output-first."""

    def __init__(self, entries: list[CostEntry]):
        self.entries = list(entries)
        self.by_name = {e.name: e for e in self.entries}
        if len(self.by_name) != len(self.entries):
            raise ConfigurationError("duplicate tensor names in cost model")
        self.total_backward_flops = int(sum(e.grad_flops + e.prop_flops for e in self.entries))
        self.total_forward_flops = int(sum(e.fwd_flops for e in self.entries))

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def subset_backward_flops(self, selected) -> int:
        """Backward FLOPs of a truncated pass that needs exactly `selected`.

        Weight-gradient cost of each selected tensor plus activation
        propagation through every layer from the output down to and
        including the deepest selected tensor's layer.
        """
        selected = set(selected)
        unknown = selected - self.by_name.keys()
        if unknown:
            raise ConfigurationError(f"unknown tensors in subset: {sorted(unknown)}")
        if not selected:
            return 0
        last = max(i for i, e in enumerate(self.entries) if e.name in selected)
        cost = sum(e.prop_flops for e in self.entries[: last + 1])
        cost += sum(self.by_name[n].grad_flops for n in selected)
        return int(cost)

    def to_dict(self) -> dict:
        return {
            "tensors": [
                {
                    "name": e.name,
                    "layer_index": e.layer_index,
                    "grad_flops": e.grad_flops,
                    "prop_flops": e.prop_flops,
                    "fwd_flops": e.fwd_flops,
                }
                for e in self.entries
            ],
            "total_backward_flops": self.total_backward_flops,
            "total_forward_flops": self.total_forward_flops,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        return cls(
            [
                CostEntry(t["name"], t["layer_index"], t["grad_flops"], t["prop_flops"], t["fwd_flops"])
                for t in d["tensors"]
            ]
        )


class FlopsTally:
    """Running operation counts for one model instance."""

    def __init__(self):
        self.forward = 0
        self.backward = 0

    def snapshot(self):
        return (self.forward, self.backward)


def _init_dense(rng, fan_in, fan_out):
    scale = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-scale, scale, size=(fan_in, fan_out))


def _check_finite(value, layer_index, what):
    if not np.all(np.isfinite(value)):
        raise NumericOverflowError(f"non-finite {what} at layer {layer_index}", layer_index)


class LayeredModel:
    """Base class: ordered layers (output-nearest first) over ParamTensors."""

    kind = "base"
    loss_kind = "analytic"

    def __init__(self):
        self.tally = FlopsTally()
        self._tensors: list[ParamTensor] = []
        self._cost_cache: dict[int, CostModel] = {}

    def _register(self, layers_output_first):
        self.layers = layers_output_first
        self._tensors = []
        for i, layer in enumerate(self.layers):
            layer.index = i
            for t in layer.tensors:
                t.layer_index = i
                self._tensors.append(t)

    def tensors(self) -> list[ParamTensor]:
        return self._tensors

    def tensor(self, name: str) -> ParamTensor:
        for t in self._tensors:
            if t.name == name:
                return t
        raise ConfigurationError(f"unknown tensor {name!r}")

    def tensors_with_role(self, role: Role) -> list[ParamTensor]:
        return [t for t in self._tensors if t.role == role]

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([t.data for t in self._tensors]) if self._tensors else np.zeros(0)

    def set_parameter_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for t in self._tensors:
            t.data[:] = vec[pos : pos + t.size]
            pos += t.size

    # subclasses implement:
    def _forward(self, batch):  # -> (loss, cache)
        raise NotImplementedError

    def _backward(self, batch, cache, active: set):  # -> dict name -> grad
        raise NotImplementedError

    def _forward_flops(self, batch_size: int) -> int:
        return self.cost_model(batch_size).total_forward_flops

    def cost_model(self, batch_size: int) -> CostModel:
        batch_size = int(batch_size)
        if batch_size not in self._cost_cache:
            self._cost_cache[batch_size] = self._cost_model(batch_size)
        return self._cost_cache[batch_size]

    def _cost_model(self, batch_size: int) -> CostModel:
        raise NotImplementedError

    def forward(self, batch: Batch) -> float:
        loss, _ = self.forward_with_cache(batch)
        return loss

    def forward_with_cache(self, batch: Batch):
        # overflow surfaces as a NumericOverflowError from the finite checks,
        # not as numpy runtime warnings
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            loss, cache = self._forward(batch)
        if not np.isfinite(loss):
            raise NumericOverflowError("non-finite loss", 0)
        self.tally.forward += self._forward_flops(batch.size)
        return float(loss), cache

    def backward_truncated(self, batch: Batch, active) -> dict:
        """Gradients for the tensors in `active`; empty set is a free no-op."""
        active = set(active)
        if not active:
            return {}
        known = {t.name for t in self._tensors}
        unknown = active - known
        if unknown:
            raise ConfigurationError(f"unknown tensors in active set: {sorted(unknown)}")
        _, cache = self._forward(batch)
        return self.backward_from_cache(batch, cache, active)

    def backward_from_cache(self, batch: Batch, cache, active) -> dict:
        active = set(active)
        if not active:
            return {}
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            grads = self._backward(batch, cache, active)
        self.tally.backward += self.cost_model(batch.size).subset_backward_flops(active)
        return grads


class QuadraticModel(LayeredModel):
    """Sum of independent quadratic blocks 0.5*c*||theta - target||^2.

    Each block is one tensor in its own layer. Analytic model: the batch
    argument is ignored, gradients are closed-form, and propagation costs
    are zero (there is no activation chain).
    """

    kind = "quadratic"
    loss_kind = "analytic"

    def __init__(self, blocks=((10, 1.0, 0.0),), seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.curvatures = []
        self.targets = []
        layers = []
        for i, (dim, curvature, target) in enumerate(blocks):
            dim = int(dim)
            init = rng.uniform(-1.0, 1.0, size=dim)
            t = ParamTensor(f"block{i}", (dim,), init)
            layer = _AnalyticLayer([t])
            layers.append(layer)
            self.curvatures.append(float(curvature))
            self.targets.append(np.full(dim, float(target)) if np.isscalar(target) else np.asarray(target, float))
        self._register(layers)

    def dummy_batch(self) -> Batch:
        return Batch(np.zeros((1, 1)), np.zeros((1, 1)))

    def _forward(self, batch):
        loss = 0.0
        for t, c, tgt in zip(self._tensors, self.curvatures, self.targets):
            d = t.data - tgt
            loss += 0.5 * c * float(d @ d)
        return loss, None

    def _backward(self, batch, cache, active):
        grads = {}
        for t, c, tgt in zip(self._tensors, self.curvatures, self.targets):
            if t.name in active:
                grads[t.name] = c * (t.data - tgt)
        return grads

    def _cost_model(self, batch_size: int) -> CostModel:
        return CostModel(
            [CostEntry(t.name, t.layer_index, t.size, 0, t.size) for t in self._tensors]
        )


class RosenbrockModel(LayeredModel):
    """(a - x)^2 + b*(y - x^2)^2 with tensors x (layer 0) and y (layer 1)."""

    kind = "rosenbrock"
    loss_kind = "analytic"

    def __init__(self, a=1.0, b=100.0, x0=-1.2, y0=1.0):
        super().__init__()
        self.a = float(a)
        self.b = float(b)
        tx = ParamTensor("x", (1,), [float(x0)])
        ty = ParamTensor("y", (1,), [float(y0)])
        self._register([_AnalyticLayer([tx]), _AnalyticLayer([ty])])

    def dummy_batch(self) -> Batch:
        return Batch(np.zeros((1, 1)), np.zeros((1, 1)))

    def _forward(self, batch):
        x = self._tensors[0].data[0]
        y = self._tensors[1].data[0]
        return (self.a - x) ** 2 + self.b * (y - x * x) ** 2, None

    def _backward(self, batch, cache, active):
        x = self._tensors[0].data[0]
        y = self._tensors[1].data[0]
        grads = {}
        if "x" in active:
            grads["x"] = np.array([-2.0 * (self.a - x) - 4.0 * self.b * x * (y - x * x)])
        if "y" in active:
            grads["y"] = np.array([2.0 * self.b * (y - x * x)])
        return grads

    def _cost_model(self, batch_size: int) -> CostModel:
        return CostModel(
            [CostEntry(t.name, t.layer_index, 1, 0, 1) for t in self._tensors]
        )


class _AnalyticLayer:
    def __init__(self, tensors):
        self.tensors = tensors
        self.index = 0


class _DenseLayer:
    """y = act(x @ W + b); backward computes the input gradient whenever the
    layer is traversed, including as the deepest one, so measured FLOPs match
    the cost model exactly."""

    def __init__(self, name, fan_in, fan_out, rng, activation):
        self.fan_in = fan_in
        self.fan_out = fan_out
        self.activation = activation
        W = ParamTensor(f"{name}.weight", (fan_in, fan_out), _init_dense(rng, fan_in, fan_out))
        b = ParamTensor(f"{name}.bias", (fan_out,), np.zeros(fan_out))
        self.tensors = [W, b]
        self.index = 0

    def forward(self, x):
        pre = x @ self.tensors[0].view() + self.tensors[1].data
        out = np.tanh(pre) if self.activation == "tanh" else pre
        return out, (x, out if self.activation == "tanh" else None)

    def backward(self, g_out, cache, active):
        x, tanh_out = cache
        g_pre = g_out * (1.0 - tanh_out * tanh_out) if self.activation == "tanh" else g_out
        grads = {}
        W, b = self.tensors
        if W.name in active:
            grads[W.name] = (x.T @ g_pre).reshape(-1)
        if b.name in active:
            grads[b.name] = g_pre.sum(axis=0)
        g_in = g_pre @ W.view().T
        return grads, g_in

    def cost_entries(self, layer_index, batch):
        mw = 2 * batch * self.fan_in * self.fan_out
        W, b = self.tensors
        return [
            CostEntry(W.name, layer_index, mw, mw, mw),
            CostEntry(b.name, layer_index, batch * self.fan_out, 0, 0),
        ]


class MLPModel(LayeredModel):
    """Dense tanh stack; final layer is linear into the loss head."""

    kind = "mlp"

    def __init__(self, dims=(2, 16, 2), loss="cross_entropy", seed=0):
        super().__init__()
        if loss not in ("cross_entropy", "mse"):
            raise ConfigurationError(f"unsupported loss {loss!r}")
        self.loss_kind = loss
        self.dims = tuple(int(d) for d in dims)
        rng = np.random.default_rng(seed)
        n = len(self.dims) - 1
        forward_layers = []
        for i in range(n):
            act = "tanh" if i < n - 1 else None
            # names carry the output-first index so tensor names match layer_index
            forward_layers.append(
                _DenseLayer(f"layer{n - 1 - i}", self.dims[i], self.dims[i + 1], rng, act)
            )
        self._register(forward_layers[::-1])

    def _forward(self, batch):
        x = np.asarray(batch.inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ConfigurationError(f"mlp expects inputs (batch, {self.dims[0]}), got {x.shape}")
        caches = []
        h = x
        for li in range(len(self.layers) - 1, -1, -1):
            h, c = self.layers[li].forward(h)
            _check_finite(h, li, "activations")
            caches.append(c)
        loss, g_logits = self._loss(h, batch)
        return loss, (caches, g_logits)

    def _loss(self, logits, batch):
        B = logits.shape[0]
        if self.loss_kind == "cross_entropy":
            y = np.asarray(batch.targets).reshape(-1).astype(int)
            shifted = logits - logits.max(axis=1, keepdims=True)
            logz = np.log(np.exp(shifted).sum(axis=1))
            nll = logz - shifted[np.arange(B), y]
            probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
            g = probs
            g[np.arange(B), y] -= 1.0
            return float(nll.mean()), g / B
        diff = logits - np.asarray(batch.targets, dtype=np.float64).reshape(logits.shape)
        return 0.5 * float((diff * diff).sum()) / B, diff / B

    def _backward(self, batch, cache, active):
        caches, g = cache
        deepest = max(self.tensor(n).layer_index for n in active)
        grads = {}
        for li in range(deepest + 1):
            layer_grads, g = self.layers[li].backward(g, caches[len(self.layers) - 1 - li], active)
            grads.update(layer_grads)
        return grads

    def _cost_model(self, batch_size: int) -> CostModel:
        entries = []
        for li, layer in enumerate(self.layers):
            entries.extend(layer.cost_entries(li, batch_size))
        return CostModel(entries)


class _EmbeddingLayer:
    """Token + positional embedding; the deepest layer of the LM."""

    def __init__(self, vocab, context, d_model, rng):
        self.vocab = vocab
        self.context = context
        self.d_model = d_model
        scale = 1.0 / np.sqrt(d_model)
        tok = ParamTensor("embed.token", (vocab, d_model), rng.uniform(-scale, scale, (vocab, d_model)))
        pos = ParamTensor("embed.position", (context, d_model), rng.uniform(-scale, scale, (context, d_model)))
        self.tensors = [tok, pos]
        self.index = 0

    def forward(self, tokens):
        T = tokens.shape[1]
        out = self.tensors[0].view()[tokens] + self.tensors[1].view()[:T]
        return out, tokens

    def backward(self, g_out, cache, active):
        tokens = cache
        grads = {}
        tok, pos = self.tensors
        if tok.name in active:
            g = np.zeros((self.vocab, self.d_model))
            np.add.at(g, tokens.reshape(-1), g_out.reshape(-1, self.d_model))
            grads[tok.name] = g.reshape(-1)
        if pos.name in active:
            g = np.zeros((self.context, self.d_model))
            g[: tokens.shape[1]] = g_out.sum(axis=0)
            grads[pos.name] = g.reshape(-1)
        return grads, None

    def cost_entries(self, layer_index, batch, T):
        n = batch * T * self.d_model
        tok, pos = self.tensors
        return [
            CostEntry(tok.name, layer_index, n, 0, n),
            CostEntry(pos.name, layer_index, n, 0, n),
        ]


class _HeadLayer:
    """Linear map from the residual stream to vocabulary logits."""

    def __init__(self, d_model, vocab, rng):
        self.d_model = d_model
        self.vocab = vocab
        W = ParamTensor("head.weight", (d_model, vocab), _init_dense(rng, d_model, vocab))
        self.tensors = [W]
        self.index = 0

    def forward(self, x):
        return x @ self.tensors[0].view(), x

    def backward(self, g_out, cache, active):
        x = cache
        W = self.tensors[0]
        grads = {}
        if W.name in active:
            grads[W.name] = np.einsum("btd,btv->dv", x, g_out).reshape(-1)
        g_in = g_out @ W.view().T
        return grads, g_in

    def cost_entries(self, layer_index, batch, T):
        m = 2 * batch * T * self.d_model * self.vocab
        return [CostEntry(self.tensors[0].name, layer_index, m, m, m)]


class _AttentionBlock:
    """Single-head causal attention plus a tanh MLP, both with residuals."""

    def __init__(self, name, d_model, d_ff, rng):
        self.d_model = d_model
        self.d_ff = d_ff
        mk = lambda n, fi, fo: ParamTensor(f"{name}.{n}", (fi, fo), _init_dense(rng, fi, fo))
        self.tensors = [
            mk("wq", d_model, d_model),
            mk("wk", d_model, d_model),
            mk("wv", d_model, d_model),
            mk("wo", d_model, d_model),
            mk("w1", d_model, d_ff),
            ParamTensor(f"{name}.b1", (d_ff,), np.zeros(d_ff)),
            mk("w2", d_ff, d_model),
            ParamTensor(f"{name}.b2", (d_model,), np.zeros(d_model)),
        ]
        self.index = 0

    def forward(self, x):
        Wq, Wk, Wv, Wo, W1, b1, W2, b2 = (t.view() for t in self.tensors)
        T = x.shape[1]
        q, k, v = x @ Wq, x @ Wk, x @ Wv
        s = (q @ k.transpose(0, 2, 1)) / np.sqrt(self.d_model)
        s = np.where(np.tril(np.ones((T, T), dtype=bool)), s, -1e30)
        a = np.exp(s - s.max(axis=-1, keepdims=True))
        a /= a.sum(axis=-1, keepdims=True)
        z = a @ v
        h = x + z @ Wo
        t1 = np.tanh(h @ W1 + b1)
        out = h + t1 @ W2 + b2
        return out, (x, q, k, v, a, z, h, t1)

    def backward(self, g_out, cache, active):
        x, q, k, v, a, z, h, t1 = cache
        Wq, Wk, Wv, Wo, W1, b1, W2, b2 = self.tensors
        grads = {}

        g_t1 = g_out @ W2.view().T
        if W2.name in active:
            grads[W2.name] = np.einsum("btf,btd->fd", t1, g_out).reshape(-1)
        if b2.name in active:
            grads[b2.name] = g_out.sum(axis=(0, 1))
        g_u1 = g_t1 * (1.0 - t1 * t1)
        g_h = g_out + g_u1 @ W1.view().T
        if W1.name in active:
            grads[W1.name] = np.einsum("btd,btf->df", h, g_u1).reshape(-1)
        if b1.name in active:
            grads[b1.name] = g_u1.sum(axis=(0, 1))

        g_z = g_h @ Wo.view().T
        if Wo.name in active:
            grads[Wo.name] = np.einsum("btd,bte->de", z, g_h).reshape(-1)
        g_a = g_z @ v.transpose(0, 2, 1)
        g_v = a.transpose(0, 2, 1) @ g_z
        g_s = a * (g_a - (g_a * a).sum(axis=-1, keepdims=True))
        g_s /= np.sqrt(self.d_model)
        g_q = g_s @ k
        g_k = g_s.transpose(0, 2, 1) @ q
        g_x = g_h + g_q @ Wq.view().T + g_k @ Wk.view().T + g_v @ Wv.view().T
        for W, g in ((Wq, g_q), (Wk, g_k), (Wv, g_v)):
            if W.name in active:
                grads[W.name] = np.einsum("btd,bte->de", x, g).reshape(-1)
        return grads, g_x

    def cost_entries(self, layer_index, batch, T):
        d, f = self.d_model, self.d_ff
        proj = 2 * batch * T * d * d        # one d x d projection
        mix = 2 * batch * T * T * d         # one attention-pattern matmul
        fc1 = 2 * batch * T * d * f
        # activation propagation: g_t1, g_h(from mlp), g_z, g_a, g_v, g_q, g_k, and into x via Wq/Wk/Wv
        prop = 2 * fc1 + proj + 4 * mix + 3 * proj
        fwd = 4 * proj + 2 * mix + 2 * fc1
        names = [t.name for t in self.tensors]
        e = {
            names[0]: proj, names[1]: proj, names[2]: proj, names[3]: proj,
            names[4]: fc1, names[5]: batch * T * f, names[6]: fc1, names[7]: batch * T * d,
        }
        entries = []
        for i, t in enumerate(self.tensors):
            entries.append(
                CostEntry(t.name, layer_index, e[t.name], prop if i == 0 else 0, fwd if i == 0 else 0)
            )
        return entries


class TinyAttentionLM(LayeredModel):
    """Character-level next-token model: embedding, attention blocks, head.

    Vocabulary is capped at 64 symbols; depth is capped at 4 blocks.
    """

    kind = "attention_lm"
    loss_kind = "cross_entropy"

    def __init__(self, vocab_size=64, d_model=16, depth=2, context=16, d_ff=None, seed=0):
        super().__init__()
        if vocab_size > 64:
            raise ConfigurationError("vocab_size is capped at 64")
        if depth > 4:
            raise ConfigurationError("depth is capped at 4")
        self.vocab_size = int(vocab_size)
        self.d_model = int(d_model)
        self.depth = int(depth)
        self.context = int(context)
        self.d_ff = int(d_ff) if d_ff else 4 * self.d_model
        rng = np.random.default_rng(seed)
        embed = _EmbeddingLayer(self.vocab_size, self.context, self.d_model, rng)
        blocks = [_AttentionBlock(f"block{i}", self.d_model, self.d_ff, rng) for i in range(self.depth)]
        head = _HeadLayer(self.d_model, self.vocab_size, rng)
        # output-first: head, blocks in reverse execution order, embedding
        self._register([head] + blocks[::-1] + [embed])

    def _forward(self, batch):
        tokens = np.asarray(batch.inputs).astype(int)
        if tokens.ndim != 2 or tokens.shape[1] > self.context:
            raise ConfigurationError(
                f"lm expects token inputs (batch, T<= {self.context}), got {tokens.shape}"
            )
        if tokens.min() < 0 or tokens.max() >= self.vocab_size:
            raise ConfigurationError("token id out of vocabulary range")
        caches = []
        h = tokens
        for li in range(len(self.layers) - 1, -1, -1):
            h, c = self.layers[li].forward(h)
            _check_finite(h, li, "activations")
            caches.append(c)
        loss, g_logits = self._loss(h, batch)
        return loss, (caches, g_logits)

    def _loss(self, logits, batch):
        y = np.asarray(batch.targets).astype(int)
        B, T, V = logits.shape
        flat = logits.reshape(-1, V)
        yf = y.reshape(-1)
        shifted = flat - flat.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        nll = logz - shifted[np.arange(flat.shape[0]), yf]
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        g = probs
        g[np.arange(flat.shape[0]), yf] -= 1.0
        return float(nll.mean()), (g / flat.shape[0]).reshape(B, T, V)

    def _backward(self, batch, cache, active):
        caches, g = cache
        deepest = max(self.tensor(n).layer_index for n in active)
        grads = {}
        for li in range(deepest + 1):
            layer_grads, g = self.layers[li].backward(g, caches[len(self.layers) - 1 - li], active)
            grads.update(layer_grads)
        return grads

    def _cost_model(self, batch_size: int) -> CostModel:
        T = self.context
        entries = []
        for li, layer in enumerate(self.layers):
            entries.extend(layer.cost_entries(li, batch_size, T))
        return CostModel(entries)


def forward(model: LayeredModel, batch: Batch) -> float:
    """Scalar loss of one batch; records forward FLOPs in the model tally."""
    return model.forward(batch)


def backward_truncated(model: LayeredModel, batch: Batch, active) -> dict:
    """Gradients for `active` tensors, recomputing the forward internally."""
    return model.backward_truncated(batch, active)


def flops_profile(model: LayeredModel, batch_size: int = 1) -> CostModel:
    """Deterministic cost model at the given reference batch size."""
    return model.cost_model(int(batch_size))


def full_gradient(model: LayeredModel, batch: Batch) -> dict:
    return model.backward_truncated(batch, [t.name for t in model.tensors()])


def make_model(kind: str, seed: int = 0, **kwargs) -> LayeredModel:
    kind = kind.lower()
    if kind == "quadratic":
        return QuadraticModel(seed=seed, **kwargs)
    if kind == "rosenbrock":
        return RosenbrockModel(**kwargs)
    if kind == "mlp":
        return MLPModel(seed=seed, **kwargs)
    if kind == "attention_lm":
        return TinyAttentionLM(seed=seed, **kwargs)
    raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
