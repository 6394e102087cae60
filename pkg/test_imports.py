#!/usr/bin/env python3
"""
Smoke script: verify Identity Cleanup imports and run one short episode.
"""

import os
import sys

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def main() -> int:
    try:
        print("Testing imports...")

        from app.core.config import settings
        print("✅ Core config imported successfully")

        from app.models.env_model import EnvConfig
        from app.models.experiment_model import ExperimentSpec
        print("✅ Models imported successfully")

        from app.core.cleanup_engine import cleanup_engine
        print("✅ Cleanup engine imported successfully")

        from app.core.policies import make_policy  # noqa: F401
        print("✅ Policies imported successfully")

        from app.presenters.experiment_presenter import experiment_presenter
        print("✅ Experiment presenter imported successfully")

        from app.routers.cli_router import build_parser
        print("✅ CLI router imported successfully")

        print(f"\n🎉 All imports successful! {settings.PROJECT_NAME} v{settings.VERSION}")

        print("\nTesting basic functionality...")
        config = EnvConfig(episode_length=50)
        state = cleanup_engine.new_env(config, 0)
        print(f"✅ Environment created: {int(state.waste.sum())} waste cells, "
              f"pollution {cleanup_engine.pollution_level(state, config):.2f}")

        result = experiment_presenter.run_seed(ExperimentSpec(env=config), 0)
        print(f"✅ Episode played: collective return {result.final_return}")

        build_parser()
        print("\n🚀 Ready to run!")
        print("Run: python3 -m app.main run --config configs/baseline.toml --out results/baseline")
        return 0

    except ImportError as e:
        print(f"❌ Import error: {e}")
        return 1
    except Exception as e:
        print(f"❌ Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
