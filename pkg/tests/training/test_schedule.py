import numpy as np
import pytest

from pstl_cli.config.pipeline import TrainConfig
from pstl_cli.exception import InvalidInputError
from pstl_cli.training import cosine_lr, lr_at


def test_warmup_is_linear():
    assert cosine_lr(0, epochs=20, base_lr=0.4, warmup_epochs=4) == 0
    assert cosine_lr(1, epochs=20, base_lr=0.4, warmup_epochs=4) == pytest.approx(0.1)
    assert cosine_lr(3.5, epochs=20, base_lr=0.4, warmup_epochs=4) == pytest.approx(0.35)
    assert cosine_lr(4, epochs=20, base_lr=0.4, warmup_epochs=4) == pytest.approx(0.4)


def test_cosine_annealing():
    assert cosine_lr(0, epochs=10, base_lr=1.0) == pytest.approx(1.0)
    assert cosine_lr(5, epochs=10, base_lr=1.0) == pytest.approx(0.5)
    assert cosine_lr(9.999, epochs=10, base_lr=1.0) == pytest.approx(0.0, abs=1e-6)

    rates = [cosine_lr(epoch, epochs=30, base_lr=0.1, warmup_epochs=5) for epoch in np.arange(5, 30, 0.25)]
    assert all(later < earlier for earlier, later in zip(rates, rates[1:]))
    assert all(0 < rate <= 0.1 for rate in rates)


@pytest.mark.parametrize("epoch", [-0.5, 10, 11])
def test_epoch_outside_schedule_fails(epoch: float):
    with pytest.raises(InvalidInputError):
        cosine_lr(epoch, epochs=10, base_lr=1.0)


def test_lr_at():
    config = TrainConfig(epochs=40, warmup_epochs=10, base_lr=2e-3)
    assert lr_at(5, config) == pytest.approx(1e-3)
    assert lr_at(25, config) == pytest.approx(1e-3)
    assert lr_at(10, config) == pytest.approx(2e-3)
