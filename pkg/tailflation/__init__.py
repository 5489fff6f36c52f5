from tailflation._version import __version__
from tailflation.config import StudyConfig, load_config
from tailflation.dependence import kendall, lag_table, pearson, spearman
from tailflation.hp_filter import hp_gap, hp_trend
from tailflation.inference import coefficient_table, hall_sheather_bandwidth, powell_covariance, residual_bandwidth
from tailflation.ingest import read_frame, write_frame
from tailflation.model_selection import CandidatePool, best_subset, qr_aic
from tailflation.pipeline import build_report, describe, emit_plot_data, infer, run_study
from tailflation.qr_solver import check_optimality, fit, pinball
from tailflation.synthetic import (
    LocationScaleParams, NkpcParams, PcExpParams, lopez_template, simulate_location_scale, simulate_nkpc,
    simulate_pc_exp
)
from tailflation.timeseries import DesignMatrix, Frame, Period, QuarterlySeries, assemble

__all__ = ['__version__', 'StudyConfig', 'load_config', 'kendall', 'lag_table', 'pearson', 'spearman', 'hp_gap',
           'hp_trend', 'coefficient_table', 'hall_sheather_bandwidth', 'powell_covariance', 'residual_bandwidth',
           'read_frame', 'write_frame', 'CandidatePool', 'best_subset', 'qr_aic', 'build_report', 'describe',
           'emit_plot_data', 'infer', 'run_study', 'check_optimality', 'fit', 'pinball', 'LocationScaleParams',
           'NkpcParams', 'PcExpParams', 'lopez_template', 'simulate_location_scale', 'simulate_nkpc',
           'simulate_pc_exp', 'DesignMatrix', 'Frame', 'Period', 'QuarterlySeries', 'assemble']
