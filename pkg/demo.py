#!/usr/bin/env python3
"""
Demo Script for the Berarducci Tree Engine
Demonstrates the core functionality of the lazy infinitary lambda engine
"""

import sys
import os

# Add src directory to path
src_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src')
sys.path.insert(0, src_path)

try:
    import numpy as np

    from corpus import DemoCorpus, random_finite_term
    from syntax import parse, print_finite, print_truncated
    from reduction import Strategy, check_strong_convergence, postpone_bot, reduce
    from rnf import crnf, has_rnf
    from meaningless import Oracle, axiom_check
    from bohm import confluence_check, is_tainted, nu_to_sequence, nu_tree, nu_tree_truncated
except ImportError as e:
    print(f"Error importing modules: {e}")
    print("Make sure you're running this from the project root directory")
    sys.exit(1)

def main():
    print("🌳 Berarducci Tree Engine Demo")
    print("=" * 50)

    try:
        # Initialize the system
        print("\n1. Loading the demo corpus...")
        corpus = DemoCorpus()
        oracle = Oracle.root_active(fuel=200)
        print(f"   Loaded {len(corpus.names())} terms")
        print(f"   Kinds: {', '.join(sorted(set(corpus.records['kind'])))}")

        print("\n2. Parsing and printing...")
        print("=" * 40)
        for text in ["\\x y. x", "(\\m x. m m) (\\m x. m m)", "mu L. \\x. L", "f (g x)"]:
            parsed = parse(text, allow_open=True)
            named = print_truncated(parsed.term, 6, free_names=parsed.free_names)
            indices = print_truncated(parsed.term, 6, style="debruijn")
            print(f"   {text:28s} -> {named}")
            print(f"   {'':28s}    {indices}")

        print("\n3. Reduction traces...")
        print("=" * 40)
        m = corpus.get('m')
        for name in ('wh', 'lo', 'random:7'):
            trace = reduce(m, Strategy.parse(name, depth_bound=12), 5, oracle)
            print(f"   {name:10s} steps at depths {trace.depths()}")
            print(f"   {'':10s} end: {print_truncated(trace.end, 6)}")

        print("\n4. Root normal forms and meaninglessness...")
        print("=" * 45)
        for name in ('i', 'omega', 'omega_o', 'ix_omega', 'head_active_1'):
            t = corpus.get(name)
            result = crnf(t, 50)
            print(f"\n🔎 {name}: {corpus.text(name)}")
            print(f"   crnf: {result.verdict} ({result.whnf_steps} weak head steps)")
            print(f"   has rnf: {has_rnf(t, 50)}")
            print(f"   root-active oracle: {oracle.member(t)}")
            print(f"   head-ogre oracle: {Oracle.head_ogre(fuel=50).member(t)}")

        print("\n5. Normal form trees...")
        print("=" * 40)
        for name in ('m', 'omega', 'omega_o', 'y_f', 'ix_omega'):
            parsed = corpus.parsed(name)
            tree = nu_tree(parsed.term, oracle)
            shown = print_finite(nu_tree_truncated(parsed.term, oracle, 6), free_names=parsed.free_names)
            marker = " (tainted)" if is_tainted(tree, 6) else ""
            print(f"   {name:10s} {shown}{marker}")

        print("\n6. Confluence checks...")
        print("=" * 40)
        for name in ('m', 'omega', 'y_f', 'k_x_omega'):
            report = confluence_check(
                corpus.get(name), Strategy.parse('lo'), Strategy.parse('random:11'), 8, 8, oracle
            )
            print(f"   {name:10s} {report.status.value}")

        print("\n7. Strong convergence and postponement...")
        print("=" * 45)
        sequence = nu_to_sequence(m, oracle, 8)
        convergence = check_strong_convergence(sequence, 7)
        print(f"   {convergence.summary()}")
        print(convergence.to_frame().to_string(index=False))

        rng = np.random.default_rng(2024)
        t = random_finite_term(rng, 10).to_coterm()
        beta, (r, end) = postpone_bot(reduce(t, Strategy.parse('random:3'), 4, oracle))
        print(f"\n   Random term {print_truncated(t, 8)}")
        print(f"   beta part of {len(beta)} steps ends at {print_truncated(r, 8)}")
        print(f"   bottom part ends at {print_truncated(end, 8)}")

        print("\n8. Oracle axiom spot-checks...")
        print("=" * 40)
        for candidate in (Oracle.root_active(fuel=100), Oracle.bot_only()):
            report = axiom_check(candidate, corpus.as_mapping(), 8, 20, 0xC0FFEE)
            print(f"\n📊 {candidate.describe()['kind']}: "
                  f"{'all axioms hold' if report.passed else 'fails ' + ', '.join(report.failed_axioms())}")
            print(report.to_frame().to_string(index=False))

        print("\n" + "=" * 50)
        print("🎉 Demo completed successfully!")
        print("\nTo explore further:")
        print("   python src/cli.py tree --demo y_f --depth 10")
        print("   python src/cli.py axioms --oracle head-ogre --fuel 50")

    except Exception as e:
        print(f"❌ Fatal error: {e}")
        print("Please check that all dependencies are installed:")
        print("   pip install -r requirements.txt")

if __name__ == "__main__":
    main()
