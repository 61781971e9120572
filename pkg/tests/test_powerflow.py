import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sdnrvs.errors import InfeasibleTopologyError, NumericError, PreconditionError, TopologyError
from sdnrvs.network import random_radial
from sdnrvs.powerflow import (SolverOptions, admittance_matrix, branch_flows, bus_injections,
                              check_limits, expected_loss, jacobian, sigma_min, solve_pf,
                              write_solution_json, write_summary_csv)
from sdnrvs.scenario import Sample, ScenarioSet
from sdnrvs.synthetic import line_network, random_meshed_network, random_samples, ring_network, two_bus

from conftest import uniform_load


def p_load(net, bus, p, q=0.0):
    p_d = np.zeros(net.n_bus)
    q_d = np.zeros(net.n_bus)
    p_d[bus], q_d[bus] = p, q
    z = np.zeros(net.n_bus)
    return Sample(z, z, p_d, q_d)


def two_bus_voltage(z, p, q):
    """Receiving-end magnitude for a load p + jq behind impedance z at V1 = 1."""
    r, x = z.real, z.imag
    a = 1 - 2 * (r * p + x * q)
    return np.sqrt((a + np.sqrt(a * a - 4 * abs(z) ** 2 * (p * p + q * q))) / 2)


class TestFlows:
    @settings(max_examples=50)
    @given(st.floats(0.8, 1.2), st.floats(0.8, 1.2), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
           st.floats(0.1, 5.0), st.floats(-20.0, -0.1))
    def test_matches_complex_power(self, vi, vj, ti, tj, g, b):
        net = line_network(2, g, b)
        fl = branch_flows(net, net.all_closed(), [vi, vj], [ti, tj])[0]
        Vi, Vj, y = vi * np.exp(1j * ti), vj * np.exp(1j * tj), complex(g, b)
        s_ij = Vi * np.conj((Vi - Vj) * y)
        s_ji = Vj * np.conj((Vj - Vi) * y)
        assert fl == pytest.approx([s_ij.real, s_ij.imag, s_ji.real, s_ji.imag], abs=1e-12)

    def test_open_branch_carries_nothing(self, ring4):
        alpha = ring4.with_open([1])
        fl = branch_flows(ring4, alpha, [1.0, 0.9, 1.1, 0.95], [0.0, 0.1, -0.1, 0.05])
        assert not fl[1].any() and fl[0].any()

    def test_bus_balance_equals_admittance_form(self, ieee33):
        rng = np.random.default_rng(0)
        V = rng.uniform(0.9, 1.1, ieee33.n_bus)
        th = rng.uniform(-0.1, 0.1, ieee33.n_bus)
        alpha = ieee33.all_closed()
        p, q = bus_injections(ieee33, alpha, V, th)
        Vc = V * np.exp(1j * th)
        S = Vc * np.conj(admittance_matrix(ieee33, alpha) @ Vc)
        assert np.allclose(p, S.real, atol=1e-12) and np.allclose(q, S.imag, atol=1e-12)


class TestSolve:
    def test_flat_no_load(self, ring4):
        z = np.zeros(4)
        sol = solve_pf(ring4, ring4.with_open([0]), Sample(z, z, z, z))
        assert sol.converged and sol.iterations == 0
        assert np.all(sol.V == 1.0) and sol.loss == 0.0

    @pytest.mark.parametrize("p,q", [(0.1, 0.0), (0.2, 0.05), (0.3, -0.02)])
    def test_two_bus_closed_form(self, p, q):
        net = two_bus(1.0, -3.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, p, q), SolverOptions(tolerance=1e-12))
        assert sol.converged
        assert sol.V[1] == pytest.approx(two_bus_voltage(1 / complex(1.0, -3.0), p, q), abs=1e-8)
        # loss is |I|^2 r with |I| = |S| / |V2|
        r = (1 / complex(1.0, -3.0)).real
        assert sol.loss == pytest.approx(r * (p * p + q * q) / sol.V[1] ** 2, abs=1e-11)

    def test_loss_is_injection_sum(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        assert sol.loss == pytest.approx(sol.p.sum(), abs=1e-15)
        assert sol.loss == pytest.approx(sol.flows[:, 0].sum() + sol.flows[:, 2].sum(), abs=1e-15)
        # non-slack injections match the specification up to the mismatch
        assert np.allclose(sol.p[1:], -ieee33_nominal.p_d[1:], atol=1e-8)

    def test_ieee33_base_loss(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        # published base-case loss of this feeder, 202.67 kW on a 10 MVA base
        assert sol.loss * 10e3 == pytest.approx(202.67, abs=0.1)
        assert sol.V.min() == pytest.approx(0.9131, abs=5e-4)

    def test_meshed_requires_flag(self, ring4, ring4_scen):
        with pytest.raises(PreconditionError):
            solve_pf(ring4, ring4.all_closed(), ring4_scen.scenarios[0])
        sol = solve_pf(ring4, ring4.all_closed(), ring4_scen.scenarios[0], meshed=True)
        assert sol.converged

    def test_disconnected(self, ring4, ring4_scen):
        with pytest.raises(TopologyError):
            solve_pf(ring4, ring4.with_open([0, 2]), ring4_scen.scenarios[0])

    def test_overload_does_not_converge(self):
        net = two_bus(1.0, -3.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 5.0))
        assert not sol.converged

    def test_expected_loss_reports_scenario(self):
        net = two_bus(1.0, -3.0)
        scen = ScenarioSet((p_load(net, 1, 0.1), p_load(net, 1, 5.0)), [0.5, 0.5])
        with pytest.raises(InfeasibleTopologyError) as info:
            expected_loss(net, net.all_closed(), scen)
        assert info.value.scenario == 1

    def test_expected_loss_weights(self):
        net = two_bus(1.0, -3.0)
        s1, s2 = p_load(net, 1, 0.1), p_load(net, 1, 0.2)
        val, sols = expected_loss(net, net.all_closed(), ScenarioSet((s1, s2), [0.25, 0.75]))
        assert val == pytest.approx(0.25 * sols[0].loss + 0.75 * sols[1].loss, rel=1e-14)

    def test_options_validated(self):
        with pytest.raises(ValueError):
            SolverOptions(tolerance=0)


class TestLimits:
    def test_voltage_floor(self):
        net = two_bus(1.0, -3.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 0.9))
        assert sol.converged and sol.V[1] < 0.9
        kinds = {v.kind for v in check_limits(sol, net)}
        assert kinds == {"v_min"}

    def test_substation_import(self):
        net = line_network(2, 50.0, -50.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 11.0))
        assert sol.converged
        assert "p_max" in {v.kind for v in check_limits(sol, net)}

    def test_clean_case(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        assert check_limits(sol, ieee33) == []


def symbolic_jacobian(net, alpha, V, theta):
    """Jacobian of the slack-free injections by symbolic differentiation."""
    n = net.n_bus
    th = sp.symbols(f"t0:{n}")
    vm = sp.symbols(f"v0:{n}")
    P = [0] * n
    Q = [0] * n
    for k in np.flatnonzero(alpha):
        i, j, g, b = int(net.f[k]), int(net.t[k]), float(net.g[k]), float(net.b[k])
        for a, c in ((i, j), (j, i)):
            d = th[a] - th[c]
            P[a] += vm[a] ** 2 * g - vm[a] * vm[c] * (b * sp.sin(d) + g * sp.cos(d))
            Q[a] += -vm[a] ** 2 * b - vm[a] * vm[c] * (g * sp.sin(d) - b * sp.cos(d))
    pq = [k for k in range(n) if k != net.substation]
    f = sp.Matrix([P[k] for k in pq] + [Q[k] for k in pq])
    x = [th[k] for k in pq] + [vm[k] for k in pq]
    J = f.jacobian(x)
    subs = {**{th[k]: theta[k] for k in range(n)}, **{vm[k]: V[k] for k in range(n)}}
    return np.array(J.subs(subs).evalf(), dtype=float)


class TestJacobian:
    def test_matches_symbolic(self):
        net = random_meshed_network(4, 1, np.random.default_rng(0))
        alpha = net.with_open([net.n_branch - 1])
        sample = random_samples(net, 1, np.random.default_rng(1))[0]
        sol = solve_pf(net, alpha, sample)
        J = jacobian(net, alpha, sol)
        assert np.allclose(J, symbolic_jacobian(net, alpha, sol.V, sol.theta), atol=1e-12)

    def test_shape(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        assert jacobian(ieee33, ieee33_base_alpha, sol).shape == (64, 64)

    def test_unconverged_rejected(self):
        net = two_bus(1.0, -3.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 5.0))
        with pytest.raises(PreconditionError):
            jacobian(net, net.all_closed(), sol)


class TestSigmaMin:
    def test_identity(self):
        assert sigma_min(np.eye(5)) == pytest.approx(1.0)

    def test_singular(self):
        assert sigma_min(np.array([[1.0, 2.0], [2.0, 4.0]])) == pytest.approx(0.0, abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(NumericError):
            sigma_min(np.array([[np.nan]]))

    def test_decreases_with_load(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        vals = []
        for s in (0.5, 1.0, 1.5):
            sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal.scaled(load=s))
            vals.append(sigma_min(jacobian(ieee33, ieee33_base_alpha, sol)))
        assert vals[0] > vals[1] > vals[2]


class TestReports:
    def test_json_and_csv(self, tmp_path, ieee33, ieee33_nominal, ieee33_base_alpha):
        import csv
        import json

        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        write_solution_json(tmp_path / "s.json", sol, ieee33, {"manifest_hash": "x"})
        doc = json.loads((tmp_path / "s.json").read_text())
        assert doc["manifest_hash"] == "x" and len(doc["flows"]) == 32
        write_summary_csv(tmp_path / "s.csv", [(0, sol.loss, 0.1, 0)], "header")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "# header"
        assert list(csv.reader(lines[1:]))[1][0] == "0"


class TestRandomRadialSolves:
    def test_converged_solutions_meet_tolerance(self, ieee33, ieee33_nominal):
        # long chains can be beyond loadability at peak load; those report
        # converged=False rather than raising
        rng = np.random.default_rng(0)
        n_conv = 0
        for _ in range(30):
            alpha = random_radial(ieee33, rng)
            sol = solve_pf(ieee33, alpha, ieee33_nominal)
            if sol.converged:
                n_conv += 1
                assert sol.max_mismatch <= 1e-8
            else:
                assert sol.iterations > 0
        assert n_conv > 0


def closed_form_two_bus(g, b, p):
    z = 1 / complex(g, b)
    v2 = two_bus_voltage(z, p, 0.0)
    return v2, z.real * p * p / v2 ** 2


def central_difference_jacobian(net, alpha, V, theta, h=1e-6):
    pq = [k for k in range(net.n_bus) if k != net.substation]

    def f(x):
        th, vm = theta.copy(), V.copy()
        th[pq], vm[pq] = x[:len(pq)], x[len(pq):]
        p, q = bus_injections(net, alpha, vm, th)
        return np.concatenate([p[pq], q[pq]])

    x0 = np.concatenate([theta[pq], V[pq]])
    J = np.empty((x0.size, x0.size))
    for c in range(x0.size):
        d = np.zeros_like(x0)
        d[c] = h
        J[:, c] = (f(x0 + d) - f(x0 - d)) / (2 * h)
    return J


class TestDocumentedExamples:
    def test_flat_state_carries_no_flow(self):
        net = line_network(2, 3.0, -7.0)
        assert not branch_flows(net, net.all_closed(), [1.0, 1.0], [0.2, 0.2]).any()

    def test_scalar_flow_value(self):
        net = line_network(2, 1.0, -10.0)
        fl = branch_flows(net, net.all_closed(), [1.0, 0.98], [0.02, 0.0])[0]
        assert fl[0] == pytest.approx(1.0 - 0.98 * (-10 * np.sin(0.02) + np.cos(0.02)), abs=1e-14)

    def test_two_bus_half_load(self):
        net = two_bus(1.0, -10.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 0.5), SolverOptions(tolerance=1e-12))
        v2, loss = closed_form_two_bus(1.0, -10.0, 0.5)
        assert sol.V[1] == pytest.approx(v2, abs=1e-10)
        assert sol.loss == pytest.approx(loss, abs=1e-10)
        assert sol.loss == pytest.approx(sol.flows[0, 0] + sol.flows[0, 2], abs=1e-15)

    def test_identical_scenarios(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        single, _ = expected_loss(ieee33, ieee33_base_alpha, ScenarioSet.single(ieee33_nominal))
        double, _ = expected_loss(ieee33, ieee33_base_alpha,
                                  ScenarioSet((ieee33_nominal, ieee33_nominal), [0.5, 0.5]))
        assert double == pytest.approx(single, rel=1e-14)

    def test_five_scenarios_weighted_sum(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        scale = [0.6, 0.8, 1.0, 1.1, 0.7]
        pi = np.array([0.1, 0.3, 0.2, 0.25, 0.15])
        scen = ScenarioSet(tuple(ieee33_nominal.scaled(load=s) for s in scale), pi)
        val, sols = expected_loss(ieee33, ieee33_base_alpha, scen)
        manual = sum(w * solve_pf(ieee33, ieee33_base_alpha, s).loss for w, s in zip(pi, scen.scenarios))
        assert val == pytest.approx(manual, rel=1e-13)

    def test_flat_solution_within_limits(self, ring4):
        z = np.zeros(4)
        sol = solve_pf(ring4, ring4.with_open([0]), Sample(z, z, z, z))
        assert check_limits(sol, ring4) == []

    def test_voltage_violation_magnitude(self):
        net = line_network(2)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 0.0))
        sol.V = np.array([1.0, 0.85])
        (v,) = check_limits(sol, net)
        assert (v.kind, v.element) == ("v_min", 1) and v.magnitude == pytest.approx(0.05)

    def test_flow_violation(self):
        from sdnrvs.network import Branch, Network
        base = line_network(2)
        net = Network(base.buses, (Branch(0, 0, 1, 1.0, -10.0, s_max=0.9),), 1.0)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 0.0))
        sol.flows = np.array([[0.8, 0.6, -0.8, -0.6]])
        assert [v.kind for v in check_limits(sol, net)] == ["s_max"]

    def test_two_bus_flat_jacobian(self):
        g, b = 1.0, -10.0
        net = two_bus(g, b)
        sol = solve_pf(net, net.all_closed(), p_load(net, 1, 0.0))
        J = jacobian(net, net.all_closed(), sol)
        assert J == pytest.approx(np.array([[-b, g], [-g, -b]]), abs=1e-14)
        assert np.allclose(J, symbolic_jacobian(net, net.all_closed(), sol.V, sol.theta), atol=1e-14)

    def test_finite_differences(self, ieee33, ieee33_nominal, ieee33_base_alpha):
        sol = solve_pf(ieee33, ieee33_base_alpha, ieee33_nominal)
        J = jacobian(ieee33, ieee33_base_alpha, sol)
        Jfd = central_difference_jacobian(ieee33, ieee33_base_alpha, sol.V, sol.theta)
        assert np.max(np.abs(J - Jfd)) <= 1e-6 * np.max(np.abs(J))

    def test_open_branch_contributes_nothing(self, ring4):
        rng = np.random.default_rng(0)
        V, th = rng.uniform(0.95, 1.05, 4), rng.uniform(-0.05, 0.05, 4)
        sol = solve_pf(ring4, ring4.with_open([1]), p_load(ring4, 2, 0.0))
        sol.V, sol.theta = V, th
        net_cut = ring4.without_branch(1)
        J_open = jacobian(ring4, ring4.with_open([1]), sol)
        assert np.allclose(J_open, jacobian(net_cut, net_cut.all_closed(), sol), atol=1e-15)

    def test_sigma_min_diag(self):
        assert sigma_min(np.eye(3)) == 1.0
        assert sigma_min(np.diag([5.0, 2.0, 0.1])) == pytest.approx(0.1, rel=1e-15)

    def test_sigma_min_decreasing_to_collapse(self):
        g, b = 1.0, -10.0
        z = 1 / complex(g, b)
        p_max = 1 / (2 * (z.real + abs(z)))
        net = two_bus(g, b)
        vals = []
        for s in np.linspace(0.0, 0.95, 20):
            sol = solve_pf(net, net.all_closed(), p_load(net, 1, s * p_max), SolverOptions(tolerance=1e-12))
            assert sol.converged
            vals.append(sigma_min(jacobian(net, net.all_closed(), sol)))
        assert all(b2 < a for a, b2 in zip(vals, vals[1:]))
