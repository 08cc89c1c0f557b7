"""
Tests for the redlab command line: exit codes, report files and printed summaries.
"""
import json
from unittest.mock import patch

import pytest

from redlab import cli
from redlab.dataio import read_report
from redlab.exceptions import AcceptanceFailure
from redlab.pipelines import ANCHORS, EXPERIMENTS, PIPELINES, experiment_title

ACCEPTANCE_CHECKS = {
    'nxor-zero-suppression',
    'redundancy-entropy-gap',
    'minimal-partition-exhaustive',
    'jvhw-uniform-8',
    'jvhw-beats-mle',
    'dct-round-trip',
    'FGSM-complexity-ordering',
    'DeepFool-complexity-ordering',
    'CW-L2-complexity-ordering',
    'fgsm-success-rate',
    'cw-success-rate',
    'deepfool-smaller-than-fgsm',
    'cw-smaller-than-fgsm',
    'capacity-ordering',
    'fitting-speed',
    'quality-50-harmless',
    'quality-1-harmful',
    'robustness-spearman',
    'snr-drop',
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.yaml'
    path.write_text(
        'train_size: 80\ntest_size: 30\nhidden_units: 16\nmax_epochs: 10\nbatch_size: 16\n'
        'cw_steps: 20\nmax_iter: 10\n'
    )
    return path


class TestExitCodes:
    def test_help(self, capsys):
        assert cli.run(['--help']) == 0
        assert 'verify-theorem' in capsys.readouterr().out

    def test_unknown_flag(self):
        """Test an unknown flag is a usage error."""
        assert cli.run(['nxor', '--no-such-flag']) == 1

    def test_missing_subcommand(self):
        assert cli.run([]) == 1

    def test_bad_config_value(self, tmp_path, out_dir):
        config = tmp_path / 'bad.yaml'
        config.write_text('train_size: -3\n')
        assert cli.run(['nxor', '--config', str(config), '--out', str(out_dir)]) == 1

    def test_unknown_config_key(self, tmp_path, out_dir):
        config = tmp_path / 'bad.yaml'
        config.write_text('no_such_setting: 1\n')
        assert cli.run(['nxor', '--config', str(config), '--out', str(out_dir)]) == 1

    def test_missing_input(self, tmp_path, out_dir):
        assert cli.run(['text-metrics', '--pairs', str(tmp_path / 'missing.tsv'), '--out', str(out_dir)]) == 1

    def test_failed_check_exits_2(self, out_dir):
        def failing(**_):
            raise AcceptanceFailure('nope')

        with patch.dict(cli.PIPELINES, {'nxor': failing}):
            assert cli.run(['nxor', '--out', str(out_dir)]) == 2


class TestAnchors:
    def test_every_command_has_one(self):
        assert set(ANCHORS) == set(EXPERIMENTS) == set(PIPELINES)

    def test_title(self):
        assert experiment_title('quality-sweep') == 'accuracy-vs-jpeg-quality (Fig. 4)'
        assert experiment_title('measure-entropy').endswith('(Table 1)')


class TestNxor:
    def test_table(self, capsys, out_dir):
        assert cli.run(['nxor', '--out', str(out_dir)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 10
        rows = read_report(out_dir / 'nxor.csv')
        assert len(rows) == 9
        assert [r['adv_count'] for r in rows if r['w1'] == 0 and r['w2'] == 0] == [0]
        assert (out_dir / 'nxor.manifest.json').exists()

    def test_generalized(self, capsys, out_dir):
        assert cli.run(['nxor', '--redundant-bits', '2', '--out', str(out_dir)]) == 0
        assert '81 weight settings over 16 inputs' in capsys.readouterr().out
        assert len(read_report(out_dir / 'nxor.csv')) == 81

    def test_plot(self, out_dir):
        assert cli.run(['nxor', '--out', str(out_dir), '--plot', str(out_dir / 'points.svg')]) == 0
        assert (out_dir / 'points.svg').read_text().lstrip().startswith('<svg')

    def test_json_embeds_manifest(self, out_dir):
        assert cli.run(['nxor', '--out', str(out_dir), '--format', 'json', '--seed', '5']) == 0
        doc = json.loads((out_dir / 'nxor.json').read_text())
        assert doc['experiment'] == 'nxor-suppression-table (Fig. 2b)'
        assert doc['manifest']['seed'] == 5
        assert 'started' not in doc['manifest']
        sidecar = json.loads((out_dir / 'nxor.manifest.json').read_text())
        assert sidecar['subcommand'] == 'nxor'
        assert sidecar['started'] is not None

    def test_csv_header_names_anchor(self, out_dir):
        assert cli.run(['nxor', '--out', str(out_dir)]) == 0
        first = (out_dir / 'nxor.csv').read_text().splitlines()[0]
        assert first == '# experiment: nxor-suppression-table (Fig. 2b)'

    def test_same_seed_same_bytes(self, out_dir):
        runs = []
        for _ in range(2):
            assert cli.run(['nxor', '--out', str(out_dir), '--format', 'json']) == 0
            runs.append((out_dir / 'nxor.json').read_bytes())
        assert runs[0] == runs[1]


class TestVerifyTheorem:
    def test_hundred_trials(self, capsys, out_dir):
        assert cli.run(['verify-theorem', '--trials', '100', '--seed', '7', '--out', str(out_dir)]) == 0
        assert '100/100 entropy-gap verdicts positive' in capsys.readouterr().out
        assert len(read_report(out_dir / 'verify-theorem.csv')) == 100


class TestTextMetrics:
    def test_pairs(self, tmp_path, out_dir):
        pairs = tmp_path / 'pairs.tsv'
        pairs.write_text('good\tg00d\nmovie\tm0v!e\n', encoding='utf-8')
        assert cli.run(['text-metrics', '--pairs', str(pairs), '--out', str(out_dir)]) == 0
        rows = read_report(out_dir / 'text-metrics.csv')
        assert [r['side'] for r in rows] == ['benign', 'adversarial']
        assert all(r['n_pairs'] == 2 for r in rows)

    def test_pairs_required(self):
        assert cli.run(['text-metrics']) == 1


@pytest.mark.slow
class TestDatasetCommands:
    def test_measure_entropy(self, small_config, out_dir):
        assert cli.run(['measure-entropy', '--config', str(small_config), '--out', str(out_dir)]) == 0
        rows = read_report(out_dir / 'measure-entropy.csv')
        assert {r['variant'] for r in rows} == {'benign', 'fgsm'}

    def test_quality_sweep_svg(self, small_config, out_dir):
        argv = ['quality-sweep', '--config', str(small_config), '--out', str(out_dir), '--quality-list', '100,10', '--svg']
        assert cli.run(argv) == 0
        assert [r['q'] for r in read_report(out_dir / 'quality-sweep.csv')] == [100, 10]
        assert (out_dir / 'quality-sweep.svg').exists()

    def test_unknown_attack(self, small_config, out_dir):
        assert cli.run(['attack', '--attack', 'pgd', '--config', str(small_config), '--out', str(out_dir)]) == 1


@pytest.mark.acceptance
@pytest.mark.slow
class TestAcceptance:
    def test_runs(self, out_dir):
        assert cli.run(['acceptance', '--out', str(out_dir)]) == 0
        rows = read_report(out_dir / 'acceptance.csv')
        assert [r['check'] for r in rows if not r['passed']] == []
        assert {r['check'] for r in rows} >= ACCEPTANCE_CHECKS
