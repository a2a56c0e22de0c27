import numpy as np
import pytest

from cpscreen.errors import InvalidInputError
from cpscreen.kernels import (
    FeatureVector,
    GramMatrix,
    KernelSpec,
    gram,
    gram_matrix,
    kernel_eval,
    tlk_eval,
)
from cpscreen.numerics import is_psd


def fv(*values):
    return FeatureVector.from_dense(values)


def fp(*indices):
    return FeatureVector.from_indices(indices)


def test_linear_dot_product():
    assert kernel_eval(KernelSpec.linear(), fv(1, 2), fv(3, 4)) == pytest.approx(11.0)


def test_tanimoto_hand_count():
    # |{1,2,3} & {2,3,4}| = 2, union 4
    assert kernel_eval(KernelSpec.tanimoto(), fp(1, 2, 3), fp(2, 3, 4)) == pytest.approx(0.5)


def test_rbf_self_similarity_is_one():
    x = fv(0.3, -1.2, 4.0)
    assert kernel_eval(KernelSpec.rbf(0.7), x, x) == pytest.approx(1.0)


def test_rbf_value():
    got = kernel_eval(KernelSpec.rbf(0.5), fv(0.0), fv(2.0))
    assert got == pytest.approx(np.exp(-0.5 * 4.0))


def test_tanimoto_both_empty_is_zero():
    assert kernel_eval(KernelSpec.tanimoto(), fp(), fp()) == 0.0


def test_tanimoto_self_similarity_nonempty_is_exactly_one():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = fp(*rng.choice(50, size=rng.integers(1, 10), replace=False))
        assert kernel_eval(KernelSpec.tanimoto(), x, x) == 1.0


def test_linear_on_fingerprints_counts_intersection():
    assert kernel_eval(KernelSpec.linear(), fp(0, 3, 7), fp(3, 7, 9)) == pytest.approx(2.0)


def test_constant_augmented_adds_offset():
    base = KernelSpec.linear()
    aug = KernelSpec.constant_augmented(base, 1.5)
    assert kernel_eval(aug, fv(1, 0), fv(0, 1)) == pytest.approx(1.5)


def test_symmetry_across_kernels():
    rng = np.random.default_rng(1)
    dense_pairs = [(fv(*rng.standard_normal(4)), fv(*rng.standard_normal(4))) for _ in range(5)]
    sparse_pairs = [
        (fp(*rng.choice(30, 5, replace=False)), fp(*rng.choice(30, 5, replace=False)))
        for _ in range(5)
    ]
    specs_dense = [KernelSpec.linear(), KernelSpec.rbf(0.3),
                   KernelSpec.constant_augmented(KernelSpec.linear())]
    specs_sparse = specs_dense + [KernelSpec.tanimoto()]
    for spec in specs_dense:
        for x, y in dense_pairs:
            assert kernel_eval(spec, x, y) == pytest.approx(kernel_eval(spec, y, x))
    for spec in specs_sparse:
        for x, y in sparse_pairs:
            assert kernel_eval(spec, x, y) == pytest.approx(kernel_eval(spec, y, x))


def test_gram_standard_basis_is_identity():
    g = gram(KernelSpec.linear(), [fv(1, 0), fv(0, 1)])
    assert isinstance(g, GramMatrix)
    assert np.array_equal(g.values, np.eye(2))


def test_gram_single_input():
    g = gram(KernelSpec.linear(), [fv(1, 2)])
    assert g.values.shape == (1, 1)
    assert g.values[0, 0] == pytest.approx(5.0)


def test_gram_empty_input_rejected():
    with pytest.raises(InvalidInputError):
        gram(KernelSpec.linear(), [])


def test_gram_tanimoto_random_fingerprints_is_psd():
    rng = np.random.default_rng(2)
    inputs = [
        FeatureVector.from_indices(rng.choice(64, size=rng.integers(1, 12), replace=False))
        for _ in range(10)
    ]
    g = gram(KernelSpec.tanimoto(), inputs)
    assert np.array_equal(g.values, g.values.T)
    assert is_psd(g.values, tol=1e-8)


def test_gram_matches_kernel_eval_entrywise():
    rng = np.random.default_rng(3)
    inputs = [fv(*rng.standard_normal(3)) for _ in range(6)]
    for spec in (KernelSpec.linear(), KernelSpec.rbf(0.2)):
        g = gram(spec, inputs)
        for i in range(6):
            for j in range(6):
                assert g.values[i, j] == pytest.approx(
                    kernel_eval(spec, inputs[i], inputs[j]), abs=1e-12
                )


def test_gram_psd_on_larger_instances():
    rng = np.random.default_rng(4)
    inputs = [fv(*rng.standard_normal(8)) for _ in range(60)]
    for spec in (KernelSpec.linear(), KernelSpec.rbf(0.05)):
        assert is_psd(gram(spec, inputs).values, tol=1e-8)


def test_constant_augmented_gram_is_base_plus_ones():
    rng = np.random.default_rng(5)
    inputs = [fv(*rng.standard_normal(4)) for _ in range(7)]
    base = KernelSpec.rbf(0.4)
    aug = KernelSpec.constant_augmented(base, 2.5)
    gb = gram(base, inputs).values
    ga = gram(aug, inputs).values
    assert np.allclose(ga, gb + 2.5 * np.ones_like(gb))


def test_mixed_representations_rejected():
    with pytest.raises(InvalidInputError):
        kernel_eval(KernelSpec.linear(), fv(1, 2), fp(0, 1))


def test_dense_dimension_mismatch_rejected():
    with pytest.raises(InvalidInputError):
        kernel_eval(KernelSpec.linear(), fv(1, 2), fv(1, 2, 3))


def test_tlk_eval_is_plain_product():
    assert tlk_eval(0.5, 0.4) == pytest.approx(0.2)
    assert tlk_eval(1.0, 7.3) == pytest.approx(7.3)
    assert tlk_eval(0.0, 123.4) == 0.0


def test_tlk_gram_tensor_structure():
    # joint kernel over (target, ligand) pairs equals elementwise product of
    # the target block and the ligand Gram block
    rng = np.random.default_rng(6)
    lig = [fv(*rng.standard_normal(3)) for _ in range(4)]
    sims = np.array([[1.0, 0.3], [0.3, 1.0]])
    pairs = [(t, x) for t in range(2) for x in lig]
    kl = gram_matrix(KernelSpec.linear(), lig)
    joint = np.array(
        [
            [
                tlk_eval(sims[ta, tb], kl[ia, ib])
                for (tb, _), ib in zip(pairs, [i % 4 for i in range(8)])
            ]
            for (ta, _), ia in zip(pairs, [i % 4 for i in range(8)])
        ]
    )
    sim_block = np.kron(sims, np.ones((4, 4)))
    lig_block = np.kron(np.ones((2, 2)), kl)
    assert np.allclose(joint, sim_block * lig_block)


def test_feature_vector_validation():
    with pytest.raises(InvalidInputError):
        FeatureVector.from_indices([-1, 2])
    with pytest.raises(InvalidInputError):
        FeatureVector.from_dense([np.nan])
    with pytest.raises(InvalidInputError):
        FeatureVector.from_dense([[1.0, 2.0]])


def test_feature_vector_from_indices_normalizes():
    x = FeatureVector.from_indices([7, 1, 7, 3])
    assert x.indices == (1, 3, 7)
    assert x == FeatureVector.from_indices((1, 3, 7))


def test_kernel_spec_validation_and_roundtrip():
    with pytest.raises(InvalidInputError):
        KernelSpec.rbf(-1.0)
    with pytest.raises(InvalidInputError):
        KernelSpec(kind="mystery")
    spec = KernelSpec.constant_augmented(KernelSpec.rbf(0.25), 1.0)
    assert KernelSpec.from_dict(spec.to_dict()) == spec
