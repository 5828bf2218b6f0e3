import numpy as np
import pytest

from kernelsubset.dataset import Dataset, build_pair_structure, standardize


def random_dataset(rng, n, p, balanced=False):
    x = rng.standard_normal((n, p))
    if balanced:
        y = np.array([1, -1] * (n // 2) + [1] * (n % 2))
    else:
        y = rng.choice([-1, 1], size=n)
        y[0], y[1] = 1, -1
    return standardize(Dataset(x, y))


def random_instance(rng, n, p):
    ds = random_dataset(rng, n, p)
    return ds, build_pair_structure(ds)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def forced_pair_instance():
    """Two features: the first separates the classes, the second is constant on every pair."""
    from kernelsubset.dataset import pair_structure_from_arrays

    x = np.array([[-1.0, 0.0], [-1.1, 0.0], [1.0, 0.0], [1.1, 0.0]])
    y = np.array([1, 1, -1, -1])
    return pair_structure_from_arrays(x, y)


def highs_solve(text: str, suffix: str, tmp_path):
    """Solve an exported model with HiGHS; returns (objective, name -> value)."""
    highspy = pytest.importorskip("highspy")
    path = tmp_path / f"model{suffix}"
    path.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-12)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    lp = h.getLp()
    values = dict(zip(lp.col_names_, h.getSolution().col_value))
    return h.getInfo().objective_function_value, values
