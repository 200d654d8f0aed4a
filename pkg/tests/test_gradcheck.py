import numpy as np
import pytest

from promptseg import numerics as N
from promptseg.numerics import NumericsError, Tensor, grad_check
from promptseg.numerics.tensor import result


class TestGradCheck:
    def test_quadratic_closed_form(self):
        N.set_precision("verify64")
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)

        def f():
            xm = N.reshape(x, (1, 2))
            return N.sum(N.mul(xm, xm))

        report = grad_check(f, [("x", x)], eps=1e-5, tol=1e-4)
        assert report.ok
        assert report.worst().max_rel_err < 1e-8
        assert np.allclose(x.grad, [2.0, 4.0])

    def test_constant_function_zero_grad(self):
        N.set_precision("verify64")
        x = Tensor(np.array([3.0, -1.0]), requires_grad=True)
        c = Tensor(np.array(5.0))

        def f():
            return N.mul(c, 1.0) + N.sum(x * 0.0)

        report = grad_check(f, [("x", x)], eps=1e-5, tol=1e-4)
        assert report.ok
        assert np.array_equal(x.grad, np.zeros(2))

    def test_violation_names_offending_op(self):
        N.set_precision("verify64")
        x = Tensor(np.array([0.5, -0.25]), requires_grad=True)

        def broken_square(a):
            # deliberately wrong backward: claims d(a^2)/da == a
            return result("broken_square", a.data * a.data, (a,), (lambda g: g * a.data,))

        def f():
            return N.sum(broken_square(x))

        report = grad_check(f, [("x", x)], eps=1e-5, tol=1e-4)
        assert not report.ok
        assert report.failing() == ["x"]
        with pytest.raises(NumericsError, match="x"):
            grad_check(f, [("x", x)], eps=1e-5, tol=1e-4, raise_on_fail=True)

    def test_requires_verify64(self):
        x = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
        with pytest.raises(NumericsError):
            grad_check(lambda: N.sum(x), [("x", x)])

    def test_all_ops_pass_fd(self):
        from promptseg.train import op_reports

        reports = op_reports(eps=1e-5, tol=1e-4)
        for rep in reports:
            assert rep.ok, rep.summary()
