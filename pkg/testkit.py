"""
Shared helpers for the root-level test scripts

Coloured progress output, a pass/fail tracker, a suite runner and random
instance generators used by several test files.
"""

import sys
import traceback
from datetime import datetime
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

import numpy as np  # noqa: E402

from pomdp import DominanceSpec, FinitePomdp, RewardMaps  # noqa: E402


# ANSI color codes for output
class Colors:
    GREEN = '\033[92m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    RESET = '\033[0m'
    BOLD = '\033[1m'


def print_test(name):
    """Print test name"""
    print(f"\n{Colors.CYAN}{Colors.BOLD}[TEST]{Colors.RESET} {name}")


def print_success(message):
    """Print success message"""
    print(f"{Colors.GREEN}✓{Colors.RESET} {message}")


def print_error(message):
    """Print error message"""
    print(f"{Colors.RED}✗{Colors.RESET} {message}")


def print_info(message):
    """Print info message"""
    print(f"{Colors.BLUE}ℹ{Colors.RESET} {message}")


def print_section(name):
    """Print section header"""
    print(f"\n{Colors.BOLD}{'='*60}{Colors.RESET}")
    print(f"{Colors.BOLD}{name}{Colors.RESET}")
    print(f"{Colors.BOLD}{'='*60}{Colors.RESET}")


class TestResults:
    """Track test results"""
    def __init__(self):
        self.passed = 0
        self.failed = 0
        self.tests = []

    def add_pass(self, name):
        self.passed += 1
        self.tests.append((name, True))

    def add_fail(self, name, error):
        self.failed += 1
        self.tests.append((name, False, error))

    def print_summary(self):
        total = self.passed + self.failed
        print_section("Test Summary")
        print(f"Total: {total}")
        print(f"{Colors.GREEN}Passed: {self.passed}{Colors.RESET}")
        print(f"{Colors.RED}Failed: {self.failed}{Colors.RESET}")

        if self.failed > 0:
            print(f"\n{Colors.RED}Failed Tests:{Colors.RESET}")
            for test in self.tests:
                if not test[1]:
                    print(f"  {Colors.RED}✗{Colors.RESET} {test[0]}")
                    if len(test) > 2:
                        print(f"    Error: {test[2]}")


def run_suite(title, sections):
    """
    Run test functions grouped by section and print a summary

    Test functions raise on failure; the runner records the outcome and
    keeps going.

    Args:
        title: Suite title
        sections: list of (section name, [test functions])

    Returns:
        int: 0 if every test passed, 1 otherwise
    """
    results = TestResults()
    print(f"\n{Colors.BOLD}{Colors.CYAN}{'='*60}")
    print(title)
    print(f"{'='*60}{Colors.RESET}\n")
    print(f"Testing Date: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    for section_name, test_functions in sections:
        print_section(section_name)
        for test_func in test_functions:
            name = (test_func.__doc__ or test_func.__name__).strip().splitlines()[0]
            try:
                test_func()
                results.add_pass(name)
            except Exception as e:
                print_error(f"{name} failed: {e!r}")
                traceback.print_exc()
                results.add_fail(name, repr(e))

    results.print_summary()
    return 0 if results.failed == 0 else 1


# ============================================================================
# Random instance generators
# ============================================================================

def random_rows(rng, shape):
    """Strictly positive random probability rows"""
    values = rng.random(shape) + 0.01
    return values / values.sum(axis=-1, keepdims=True)


def random_pomdp(rng, max_states=4, max_actions=4, max_observations=4, discount=None):
    """
    Random POMDP plus reward maps

    Returns:
        tuple: (FinitePomdp, RewardMaps)
    """
    n_s = int(rng.integers(1, max_states + 1))
    n_a = int(rng.integers(1, max_actions + 1))
    n_o = int(rng.integers(1, max_observations + 1))
    if discount is None:
        discount = float(rng.choice([0.0, 0.25, 0.5]))
    pomdp = FinitePomdp.from_arrays(
        random_rows(rng, (n_s, n_a, n_s)),
        random_rows(rng, (n_s, n_a, n_o)),
        discount,
    )
    rewards = RewardMaps(rng.random(n_o), rng.random(n_s))
    return pomdp, rewards


def dominance_instance(rng, r_task, discount, max_states=5, max_actions=6,
                       max_observations=5):
    """
    Random instance satisfying the manipulation and task-limit conditions

    The last observation carries reward 1 and is what the last action (the
    wirehead action) always emits. Task actions only emit the other
    observations, whose rewards lie in [0, r_task].

    Returns:
        tuple: (FinitePomdp, RewardMaps, DominanceSpec)
    """
    n_s = int(rng.integers(1, max_states + 1))
    n_a = int(rng.integers(2, max_actions + 1))
    n_o = int(rng.integers(2, max_observations + 1))

    obs_kernel = np.zeros((n_s, n_a, n_o))
    obs_kernel[:, :-1, :-1] = random_rows(rng, (n_s, n_a - 1, n_o - 1))
    obs_kernel[:, -1, -1] = 1.0

    implemented = np.append(rng.random(n_o - 1) * r_task, 1.0)
    pomdp = FinitePomdp.from_arrays(random_rows(rng, (n_s, n_a, n_s)), obs_kernel, discount)
    rewards = RewardMaps(implemented, rng.random(n_s))
    spec = DominanceSpec(tuple(range(n_a - 1)), n_a - 1, r_task)
    return pomdp, rewards, spec
