from __future__ import annotations

import pytest

from loadermine.simulator import builtin_playbooks, generate


@pytest.fixture(scope="session")
def control_corpus():
    """The standard labeled control corpus: 8 families x 5 hosts x 5 sessions."""
    return generate(builtin_playbooks(), hosts_per_family=5,
                    sessions_per_host=5, seed=42)
