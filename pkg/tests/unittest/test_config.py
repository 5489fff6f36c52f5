import orjson
from pytest import mark, raises

from tailflation.config import (
    LOWER_GRID, UPPER_GRID, ColumnRole, PoolPreset, StudyConfig, load_config, preset_entries
)
from tailflation.exceptions import ConfigurationError
from tailflation.inference import BandwidthRule, Kernel
from tailflation.synthetic import NkpcParams, lopez_frame, simulate_nkpc
from tailflation.timeseries import Period


def test_defaults(tmp_path):
    (tmp_path / 'data.csv').touch()
    config = load_config(overrides={'input': tmp_path / 'data.csv'})
    assert config.lower_grid == LOWER_GRID
    assert len(config.lower_grid) == len(config.upper_grid) == 20
    assert config.lower_grid[0] == 0.01 and config.lower_grid[-1] == 0.2
    assert config.upper_grid[0] == 0.8 and config.upper_grid[-1] == 0.99
    assert config.kernel == Kernel.uniform
    assert config.bandwidth_rule == BandwidthRule.hall_sheather
    assert config.hp_lambda == 1600.0
    assert config.alpha == 0.05
    assert config.split_period == Period(2009, 1)
    assert config.quantiles[0] == (0.01, 'lower')
    assert config.quantiles[-1] == (0.99, 'upper')
    assert config.output is None


def test_grid_is_sorted(tmp_path):
    config = load_config(overrides={'input': tmp_path, 'lower_grid': [0.2, 0.05], 'upper_grid': []})
    assert config.lower_grid == [0.05, 0.2]
    assert config.quantiles == [(0.05, 'lower'), (0.2, 'lower')]


@mark.parametrize('overrides', [
    {'lower_grid': [], 'upper_grid': []},
    {'lower_grid': [0.0]},
    {'upper_grid': [1.0]},
    {'lower_grid': [0.1, 0.1]},
    {'lower_grid': [0.5], 'upper_grid': [0.5]},
    {'alpha': 1.5},
    {'hp_lambda': 0},
    {'split': '2009-01'},
    {'workers': 0},
    {'max_subset_size': 0},
    {'pool': []},
    {'pool': [{'name': 'gap', 'lag': -1}]},
    {'pool': [{'name': 'gap'}, {'name': 'gap', 'lag': 0}]},
    {'pool': [{'name': f'c{i}'} for i in range(21)]},
    {'kernel': 'epanechnikov'},
    {'columns': [{'column': 'cpi', 'role': 'price_level'}, {'column': 'x', 'role': 'gap', 'name': 'cpi'}]},
    {'unknown_setting': 1},
    {'max_size': 2},
])
def test_invalid(tmp_path, overrides):
    with raises(ConfigurationError):
        load_config(overrides={'input': tmp_path, **overrides})


def test_missing_input():
    with raises(ConfigurationError):
        load_config()


def test_file_and_overrides(tmp_path):
    (tmp_path / 'data.csv').touch()
    path = tmp_path / 'study.json'
    path.write_bytes(orjson.dumps({
        'input': 'data.csv',
        'output': 'report',
        'columns': [{'column': 'cpi', 'role': 'price_level', 'name': 'inflation'}],
        'alpha': 0.1,
        'upper_grid': [0.9, 0.95],
    }))
    config = load_config(path, {'alpha': None, 'upper_grid': [0.99], 'seed': 4})
    assert config.input == tmp_path / 'data.csv'
    assert config.output == tmp_path / 'report'
    assert config.alpha == 0.1
    assert config.upper_grid == [0.99]
    assert config.seed == 4
    assert config.columns[0].role == ColumnRole.price_level
    assert config.columns[0].target == 'inflation'


@mark.parametrize('content', [b'{not json', b'[1, 2]'])
def test_unreadable_file(tmp_path, content):
    path = tmp_path / 'study.json'
    path.write_bytes(content)
    with raises(ConfigurationError):
        load_config(path)


def test_hash_ignores_output_and_workers(tmp_path):
    (tmp_path / 'a.csv').touch()
    base = load_config(overrides={'input': tmp_path / 'a.csv', 'output': tmp_path / 'one'})
    moved = load_config(overrides={'input': tmp_path / 'a.csv', 'output': tmp_path / 'two', 'workers': 8})
    changed = load_config(overrides={'input': tmp_path / 'a.csv', 'alpha': 0.1})
    assert base.config_hash() == moved.config_hash()
    assert base.config_hash() != changed.config_hash()
    assert 'output' not in base.canonical()
    assert base.canonical()['kernel'] == 'uniform'


def test_presets():
    broad = preset_entries(PoolPreset.broad, 'inflation')
    assert len(broad) == 11
    assert ('inflation', 1) in broad
    narrow = preset_entries(PoolPreset.narrow, 'pi')
    assert ('pi', 1) in narrow
    assert ('gap', 3) in narrow
    with raises(ValueError):
        preset_entries(PoolPreset.lopez, 'inflation')


def test_candidate_pool(tmp_path):
    frame = lopez_frame(simulate_nkpc(NkpcParams(T=40)))
    config = load_config(overrides={'input': tmp_path, 'pool_preset': 'lopez', 'max_subset_size': 2})
    pool, omitted = config.candidate_pool(frame)
    assert len(pool) == 4
    assert pool.max_size == 2
    assert omitted == ('credit_spread',)

    explicit = load_config(overrides={'input': tmp_path, 'pool': [{'name': 'gap', 'lag': 2}, {'name': 'imported'}]})
    pool, omitted = explicit.candidate_pool(frame)
    assert pool.entries == (('gap', 2), ('imported', 0))
    assert omitted == ()


def test_input_must_exist(tmp_path):
    with raises(ConfigurationError) as e:
        load_config(overrides={'input': tmp_path / 'missing.csv'})
    assert 'missing.csv' in str(e.value)
    path = tmp_path / 'study.json'
    path.write_bytes(orjson.dumps({'input': 'missing.csv'}))
    with raises(ConfigurationError):
        load_config(path)
