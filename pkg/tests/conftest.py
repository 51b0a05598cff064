import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from satdeploy.constellation import build_walker_star
from satdeploy.workload import AppGraph, Microservice, RequestScenario


def make_graph(planes=2, per_plane=3, capacities=(4.0, 4.0, 4.0, 200.0),
               compute_speed=1000.0, link_rate=1000.0):
    return build_walker_star(
        planes=planes, per_plane=per_plane, altitude_km=780.0,
        inclination_deg=86.4, angular_velocity_deg_per_ms=6.0e-5,
        capacities=capacities, compute_speed=compute_speed, link_rate=link_rate,
    )


def make_light(name, demands=(0.25, 0.25, 0.0, 5.0), capacity=10,
               compute_bits=100.0, output_bits=200.0,
               prices=(2.0, 1.0, 0.5)):
    return Microservice(
        name=name, kind="light", demands=tuple(demands),
        compute_bits=compute_bits, output_bits=output_bits,
        parallel_capacity=capacity, price_deploy=prices[0],
        price_keep=prices[1], price_parallel=prices[2],
    )


def make_core(name, demands=(1.0, 1.0, 1.0, 50.0), compute_bits=500.0,
              output_bits=400.0, prices=(10.0, 2.0, 0.0)):
    return Microservice(
        name=name, kind="core", demands=tuple(demands),
        compute_bits=compute_bits, output_bits=output_bits,
        parallel_capacity=1000, price_deploy=prices[0],
        price_keep=prices[1], price_parallel=prices[2],
    )


def make_app(num_light=2, num_core=2):
    light_names = ["prepare", "encode", "project", "filter"][:num_light]
    core_names = ["backbone", "deliver"][:num_core]
    services = [make_light(n) for n in light_names]
    services += [make_core(n) for n in core_names]
    order = light_names + core_names
    edges = list(zip(order, order[1:]))
    return AppGraph(services, edges, {"main": order})


@pytest.fixture
def graph():
    return make_graph()


@pytest.fixture
def app():
    return make_app()


@pytest.fixture
def scenario():
    return RequestScenario.from_totals({"main": [55, 65, 27, 87, 76]}, 6)


@pytest.fixture
def core_scheme(app, graph):
    core = np.zeros((app.num_core, graph.size), dtype=np.int64)
    for i in range(app.num_core):
        core[i, i] = 1
    return core
