import numpy as np
import pytest

from ecpic1d.fields import FieldState, field_energy, poisson_init, zero_state
from ecpic1d.integrators import (
    IntegratorConfig,
    NoConvergence,
    PlasmaState,
    SolverDiverged,
    avf_strang_step,
    disgrad_strang_step,
    disgrad_sub_step,
    disgrad_vxe_solve,
    gauss_error,
    hs_step,
    op1_drift,
    op2_rotate,
    op4_ve_avf,
    step,
    total_energy,
)
from ecpic1d.particles import Species, deposit_charge
from ecpic1d.splines import SplineSpace, basis_values

from oracles import dense_circulant


def make_species(n_p, length, seed, q=-1.0, m=1.0, sigma=0.3):
    rng = np.random.default_rng(seed)
    return Species(
        q=q,
        m=m,
        x=rng.uniform(0, length, n_p),
        v1=sigma * rng.standard_normal(n_p),
        v2=sigma * rng.standard_normal(n_p),
        w=np.full(n_p, length / n_p),
    )


def make_plasma(seed=0, n_p=1500, n=16, p=3, length=5.0, sigma=0.3, with_b=True):
    space = SplineSpace(p, n, length)
    species = make_species(n_p, length, seed, sigma=sigma)
    fields = zero_state(space)
    rho = deposit_charge([species], space)
    fields.e1 = poisson_init(-(rho - rho.mean()), space)
    if with_b:
        j = np.arange(n)
        fields.b3 = 1e-3 * np.cos(2 * np.pi * j / n)
        fields.e2 = 1e-3 * np.sin(2 * np.pi * j / n)
    return PlasmaState(fields, [species])


def gauss_vector(state):
    from ecpic1d.splines import derivative_stencil, mass_operator

    space = state.fields.space
    rho = deposit_charge(state.species, space)
    d = derivative_stencil(space)
    m1 = mass_operator(space.lowered())
    return d.transpose().apply(m1.apply(state.fields.e1)) + rho - rho.mean()


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="RK4")
    with pytest.raises(ValueError):
        IntegratorConfig(ordering="reverse")
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(substeps=(0,))
    with pytest.raises(ValueError):
        IntegratorConfig(nonlinear_tol=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(preconditioner="ilu")


def test_drift():
    s = Species(q=-1.0, m=1.0, x=[0.1], v1=[2.0], v2=[0.0], w=[1.0])
    op1_drift(s, 0.2, 10.0)
    assert s.x[0] == pytest.approx(0.5, abs=1e-15)
    s.v1[:] = 0.0
    op1_drift(s, 0.7, 10.0)
    assert s.x[0] == pytest.approx(0.5, abs=1e-15)
    # dyadic data: forward and backward drift invert bitwise
    s = Species(q=-1.0, m=1.0, x=[0.25], v1=[0.5], v2=[0.0], w=[1.0])
    op1_drift(s, 0.5, 8.0)
    op1_drift(s, -0.5, 8.0)
    assert s.x[0] == 0.25


def test_drift_reversible():
    length = 7.0
    s = make_species(400, length, 4)
    x0 = s.x.copy()
    op1_drift(s, 0.37, length)
    op1_drift(s, -0.37, length)
    err = np.minimum(np.abs(s.x - x0), length - np.abs(s.x - x0))
    assert np.max(err) < 1e-13


def test_rotate_identity_and_speed():
    state = make_plasma(1, with_b=False)
    s = state.species[0]
    v1, v2 = s.v1.copy(), s.v2.copy()
    op2_rotate(s, state.fields, 0.3)
    assert np.array_equal(s.v1, v1) and np.array_equal(s.v2, v2)
    state = make_plasma(2)
    s = state.species[0]
    speed = s.v1**2 + s.v2**2
    op2_rotate(s, state.fields, 0.9)
    assert np.max(np.abs(s.v1**2 + s.v2**2 - speed)) < 1e-14
    op2_rotate(s, state.fields, -0.9)
    assert np.max(np.abs(s.v1**2 + s.v2**2 - speed)) < 1e-14


def test_rotate_matches_euler_for_small_dt():
    space = SplineSpace(2, 8, 4.0)
    fields = zero_state(space)
    fields.b3[:] = 1.0  # uniform field of value 1 by partition of unity
    s = Species(q=1.0, m=1.0, x=[1.1, 2.3], v1=[0.5, -0.2], v2=[0.1, 0.7], w=[1.0, 1.0])
    dt = 1e-4
    euler_v1 = s.v1 + dt * s.v2
    euler_v2 = s.v2 - dt * s.v1
    op2_rotate(s, fields, dt)
    assert np.max(np.abs(s.v1 - euler_v1)) < 1e-7
    assert np.max(np.abs(s.v2 - euler_v2)) < 1e-7


def test_rotate_reversible():
    state = make_plasma(3)
    s = state.species[0]
    v1, v2 = s.v1.copy(), s.v2.copy()
    op2_rotate(s, state.fields, 0.51)
    op2_rotate(s, state.fields, -0.51)
    assert np.max(np.abs(s.v1 - v1)) < 1e-13
    assert np.max(np.abs(s.v2 - v2)) < 1e-13


def test_op4_fixed_point():
    state = make_plasma(5, with_b=False)
    s = state.species[0]
    s.v1[:] = 0.0
    s.v2[:] = 0.0
    state.fields.e1[:] = 0.0
    report = op4_ve_avf(state.species, state.fields, 0.2)
    assert np.all(s.v1 == 0) and np.all(s.v2 == 0)
    assert np.all(state.fields.e1 == 0) and np.all(state.fields.e2 == 0)
    assert report.picard_iterations == 0
    assert report.energy_after == pytest.approx(report.energy_before)


def test_op4_matches_dense_block_solve():
    # Single particle, p=1: assemble the midpoint system for each (v, e)
    # pair as a dense (n+1) x (n+1) block matrix and solve directly.
    space = SplineSpace(1, 8, 8.0)
    fields = zero_state(space)
    rng = np.random.default_rng(6)
    fields.e1 = rng.standard_normal(8)
    fields.e2 = rng.standard_normal(8)
    s = Species(q=-1.5, m=2.0, x=[3.37], v1=[0.8], v2=[-0.6], w=[2.5])
    from ecpic1d.splines import mass_operator

    expected = {}
    for component, vel in ((1, s.v1[0]), (2, s.v2[0])):
        sub = space.lowered() if component == 1 else space
        e_old = fields.e1 if component == 1 else fields.e2
        first, vals = basis_values(sub, s.x[0])
        lam = np.zeros(sub.n_cells)
        np.add.at(lam, (first + np.arange(sub.degree + 1)) % sub.n_cells, vals)
        m_dense = dense_circulant(mass_operator(sub))
        dt = 0.3
        a = np.zeros((sub.n_cells + 1, sub.n_cells + 1))
        a[:-1, :-1] = m_dense
        a[:-1, -1] = dt / 2.0 * s.q * s.w[0] * lam
        a[-1, :-1] = -dt / 2.0 * (s.q / s.m) * lam
        a[-1, -1] = 1.0
        rhs = np.r_[
            m_dense @ e_old - dt / 2.0 * s.q * s.w[0] * vel * lam,
            vel + dt / 2.0 * (s.q / s.m) * lam @ e_old,
        ]
        sol = np.linalg.solve(a, rhs)
        expected[component] = (sol[:-1], sol[-1])
    op4_ve_avf([s], fields, 0.3, linear_tol=1e-15)
    assert np.max(np.abs(fields.e1 - expected[1][0])) < 1e-12
    assert np.max(np.abs(fields.e2 - expected[2][0])) < 1e-12
    assert s.v1[0] == pytest.approx(expected[1][1], abs=1e-12)
    assert s.v2[0] == pytest.approx(expected[2][1], abs=1e-12)


def test_op4_energy_conservation():
    state = make_plasma(7, n_p=2000)
    state.fields.e2 = 0.05 * np.random.default_rng(1).standard_normal(16)
    before = total_energy(state)
    report = op4_ve_avf(state.species, state.fields, 0.1)
    after = total_energy(state)
    assert abs(after - before) <= 1e-12 * (1 + before)
    assert report.linear_solver_residual <= 1e-15 * max(1.0, before)


def test_op4_scaled_mass_preconditioner_same_answer():
    a = make_plasma(8, n_p=600)
    b = a.copy()
    op4_ve_avf(a.species, a.fields, 0.2, preconditioner="mass")
    op4_ve_avf(b.species, b.fields, 0.2, preconditioner="scaled_mass")
    assert np.max(np.abs(a.fields.e1 - b.fields.e1)) < 1e-12
    assert np.max(np.abs(a.fields.e2 - b.fields.e2)) < 1e-12


def test_op4_solver_diverged():
    state = make_plasma(9, n_p=200)
    with pytest.raises(SolverDiverged):
        op4_ve_avf(state.species, state.fields, 0.2, linear_tol=1e-15, max_linear_iter=1)


def test_avf_strang_fixed_point():
    space = SplineSpace(2, 8, 4.0)
    s = Species(q=-1.0, m=1.0, x=np.linspace(0, 4, 50, endpoint=False),
                v1=np.zeros(50), v2=np.zeros(50), w=np.full(50, 4.0 / 50))
    state = PlasmaState(zero_state(space), [s])
    report = avf_strang_step(state, IntegratorConfig(scheme="AVF", dt=0.3))
    assert report.energy_after == 0.0
    assert np.all(state.fields.e1 == 0)
    assert np.all(s.x == np.linspace(0, 4, 50, endpoint=False))


@pytest.mark.parametrize("ordering", ["standard", "field_last"])
def test_avf_energy_conservation_over_run(ordering):
    state = make_plasma(10, n_p=1000)
    config = IntegratorConfig(scheme="AVF", ordering=ordering, dt=0.1)
    h0 = total_energy(state)
    for _ in range(40):
        report = avf_strang_step(state, config)
        assert abs(report.energy_after - h0) <= 1e-11 * (1 + h0)
        assert report.picard_iterations == 0


def test_avf_strang_richardson_order():
    # One step at dt vs two at dt/2 differ at O(dt^3); halving dt cuts the
    # defect by about 8.
    def defect(dt):
        base = make_plasma(11, n_p=800)
        one = base.copy()
        two = base.copy()
        avf_strang_step(one, IntegratorConfig(scheme="AVF", dt=dt))
        for _ in range(2):
            avf_strang_step(two, IntegratorConfig(scheme="AVF", dt=dt / 2))
        return max(
            np.max(np.abs(one.fields.e1 - two.fields.e1)),
            np.max(np.abs(one.fields.e2 - two.fields.e2)),
            np.max(np.abs(one.fields.b3 - two.fields.b3)),
            np.max(np.abs(one.species[0].v1 - two.species[0].v1)),
        )

    ratio = defect(0.2) / defect(0.1)
    assert 5.5 < ratio < 10.5


def test_disgrad_vxe_zero_plasma():
    space = SplineSpace(2, 8, 4.0)
    s = Species(q=-1.0, m=1.0, x=np.linspace(0, 4, 40, endpoint=False),
                v1=np.zeros(40), v2=np.zeros(40), w=np.full(40, 0.1))
    fields = zero_state(space)
    iters, _ = disgrad_vxe_solve([s], fields, 0.2, 1e-12)
    assert iters == 1
    assert np.all(fields.e1 == 0) and np.all(fields.e2 == 0)
    assert np.all(s.v1 == 0)


def test_disgrad_gauss_invariance_per_step():
    state = make_plasma(12, n_p=1200)
    config = IntegratorConfig(scheme="DisGrad", dt=0.2)
    before = gauss_vector(state)
    for _ in range(10):
        report = disgrad_strang_step(state, config)
        assert report.picard_iterations >= 1
    after = gauss_vector(state)
    assert np.max(np.abs(after - before)) < 1e-12
    assert report.gauss_residual_after < 1e-12


def test_disgrad_energy_conservation():
    state = make_plasma(13, n_p=1200)
    h0 = total_energy(state)
    config = IntegratorConfig(scheme="DisGrad", dt=0.25, nonlinear_tol=1e-12)
    for _ in range(20):
        report = disgrad_strang_step(state, config)
    assert abs(report.energy_after - h0) <= 100 * config.nonlinear_tol * (1 + h0)


def test_disgrad_no_convergence():
    state = make_plasma(14, n_p=500)
    config = IntegratorConfig(scheme="DisGrad", dt=0.5, nonlinear_tol=1e-16, max_picard=2)
    with pytest.raises(NoConvergence):
        disgrad_strang_step(state, config)


def test_disgrad_sub_matches_single_step():
    base = make_plasma(15, n_p=800)
    a = base.copy()
    b = base.copy()
    tol = 1e-12
    disgrad_strang_step(a, IntegratorConfig(scheme="DisGrad", dt=0.2, nonlinear_tol=tol))
    disgrad_sub_step(
        b,
        IntegratorConfig(
            scheme="DisGradSub", dt=0.2, nonlinear_tol=tol, sub_tol=1e-13, substeps=(1,)
        ),
    )
    assert np.max(np.abs(a.fields.e1 - b.fields.e1)) < 10 * tol
    assert np.max(np.abs(a.fields.e2 - b.fields.e2)) < 10 * tol
    assert np.max(np.abs(a.species[0].x - b.species[0].x)) < 1e-10
    assert np.max(np.abs(a.species[0].v1 - b.species[0].v1)) < 1e-10


def test_disgrad_sub_gauss_and_energy():
    state = make_plasma(16, n_p=900)
    config = IntegratorConfig(scheme="DisGradSub", dt=0.4, substeps=(3,))
    h0 = total_energy(state)
    before = gauss_vector(state)
    for _ in range(5):
        report = disgrad_sub_step(state, config)
        assert report.sub_iterations_mean >= 1.0
    assert np.max(np.abs(gauss_vector(state) - before)) < 1e-12
    assert abs(report.energy_after - h0) <= 100 * config.nonlinear_tol * (1 + h0)


def test_disgrad_sub_telescoping():
    # Electrostatic configuration (b3 = 0, e2 = 0, v2 = 0): the rotation and
    # curl wrappers are inert, so the kinetic-energy change of the substepped
    # block must cancel the electric-energy change exactly.
    state = make_plasma(17, n_p=700, with_b=False)
    state.species[0].v2[:] = 0.0
    config = IntegratorConfig(scheme="DisGradSub", dt=0.3, substeps=(4,))
    from ecpic1d.particles import kinetic_energy

    ke0 = kinetic_energy(state.species)
    fe0 = field_energy(state.fields)
    disgrad_sub_step(state, config)
    ke1 = kinetic_energy(state.species)
    fe1 = field_energy(state.fields)
    d_kin = ke1 - ke0
    d_elec = (fe1.e1_energy + fe1.e2_energy) - (fe0.e1_energy + fe0.e2_energy)
    assert abs(d_kin) > 1e-8  # energy actually moved
    assert abs(d_kin + d_elec) <= 100 * config.nonlinear_tol * (1 + ke0)
    assert fe1.b3_energy == 0.0


def test_hs_gauss_conservation():
    state = make_plasma(18, n_p=800)
    config = IntegratorConfig(scheme="HS", dt=0.05)
    for _ in range(200):
        report = hs_step(state, config)
    assert report.gauss_residual_after < 1e-13
    assert report.picard_iterations == 0


def test_hs_energy_error_nonzero_but_small():
    state = make_plasma(19, n_p=800)
    config = IntegratorConfig(scheme="HS", dt=0.05)
    h0 = total_energy(state)
    errs = []
    for _ in range(100):
        report = hs_step(state, config)
        errs.append(abs(report.energy_after - h0))
    assert max(errs) > 0.0
    assert max(errs) < 1e-3 * (1 + h0)


def test_step_dispatch():
    for scheme, fn in (
        ("HS", hs_step),
        ("AVF", avf_strang_step),
        ("DisGrad", disgrad_strang_step),
        ("DisGradSub", disgrad_sub_step),
    ):
        a = make_plasma(20, n_p=300)
        b = a.copy()
        config = IntegratorConfig(scheme=scheme, dt=0.1, substeps=(2,))
        ra = step(a, config)
        rb = fn(b, config)
        assert np.array_equal(a.fields.e1, b.fields.e1)
        assert ra.picard_iterations == rb.picard_iterations
