from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Mlp:
    """Dense layers with relu between them and a linear output layer.

    Rows of the input are independent samples, so one instance applied to a
    (cells, features) matrix shares its weights across every cell.
    """

    def __init__(self, name: str, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError(f"{name} needs at least an input and an output size")
        self.name = name
        self.sizes = tuple(int(s) for s in sizes)
        self.layers: List[Tuple[Tensor, Tensor]] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            weight = Tensor(glorot_uniform(rng, fan_in, fan_out), requires_grad=True)
            bias = Tensor(np.zeros(fan_out), requires_grad=True)
            self.layers.append((weight, bias))

    @property
    def in_features(self) -> int:
        return self.sizes[0]

    @property
    def out_features(self) -> int:
        return self.sizes[-1]

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, (weight, bias) in enumerate(self.layers):
            x = x @ weight + bias
            if i != last:
                x = T.relu(x)
        return x

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {}
        for i, (weight, bias) in enumerate(self.layers):
            params[f"{self.name}.{i}.weight"] = weight
            params[f"{self.name}.{i}.bias"] = bias
        return params

    def __repr__(self):
        return f"<Mlp {self.name} {'->'.join(map(str, self.sizes))}>"
