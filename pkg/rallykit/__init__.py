"""
Estimation and control for a 1:5 scale autonomous rally vehicle.
Tire and vehicle dynamics, bifilar inertia identification, adaptive joint-state UKF,
GPS/IMU factor-graph smoothing, MPPI control and a closed-loop track simulator.
Experiment files are handled by `rallykit.io`; the command line lives in `rallykit.cli`.
"""
import importlib
import itertools
from typing import TYPE_CHECKING

__version__ = '0.1.0'

__modules_all__ = {
    'transforms': [
        'skew_symmetric',
        'axis_angle_to_matrix',
        'matrix_to_axis_angle',
        'euler_axis_angle_rotation',
        'euler_angles_to_matrix',
        'matrix_to_euler_angles',
        'wrap_angle',
        'lerp',
        'piecewise_lerp',
    ],
    'tire': [
        'MagicFormulaParams',
        'WheelSlip',
        'TireForce',
        'wheel_slip',
        'magic_formula_mu',
        'tire_forces',
    ],
    'vehicle': [
        'STATE3_FIELDS',
        'STATE11_FIELDS',
        'CONTROL_FIELDS',
        'VehicleParams',
        'FullVehicleParams',
        'VehicleState3',
        'VehicleState11',
        'ControlInput',
        'PRESETS',
        'vehicle_preset',
        'normal_loads',
        'body_forces',
        'single_track_derivatives',
        'double_track_derivatives',
        'full_vehicle_derivatives',
        'integrate_rk4',
    ],
    'bifilar': [
        'BifilarSetup',
        'oscillation_period',
        'bifilar_moi',
        'moi_table',
    ],
    'ukf': [
        'UtParams',
        'SigmaPointSet',
        'Belief',
        'NoiseStatistics',
        'AugmentedState',
        'ParameterSpec',
        'NoiseSampleWindow',
        'FilterModel',
        'JointStateUKF',
        'DEFAULT_PARAMETER_BOUNDS',
        'nearest_positive_definite',
        'sigma_points',
        'ukf_predict',
        'ukf_update',
        'joint_state_augment',
        'vehicle_process_model',
        'state_observation',
        'estimate_observation_noise',
        'estimate_process_noise',
        'alm_ukf_step',
        'observability_rank',
        'vehicle_joint_filter',
    ],
    'smoother': [
        'GRAVITY_VECTOR',
        'SmootherConfig',
        'PreintegratedImu',
        'GraphValues',
        'FactorGraph',
        'OptimizeResult',
        'StateStream',
        'preintegrate_imu',
        'build_graph',
        'initial_values',
        'optimize',
        'interpolate_state',
    ],
    'track': [
        'TrackMap',
        'CostMap',
        'ReferenceTrajectory',
        'build_oval_track',
        'signed_distance',
        'reference_trajectory',
    ],
    'sim': [
        'SensorConfig',
        'ClosedLoopConfig',
        'SensorStream',
        'TruthTrajectory',
        'LapRecord',
        'SimulationLog',
        'simulate_sensors',
        'reference_truth',
        'zero_driver',
        'excitation_driver',
        'mppi_driver',
        'initial_state',
        'run_closed_loop',
    ],
    'chassis': [
        'CHANNELS',
        'CHANNEL_RANGES',
        'ActuatorCalibration',
        'CalibrationTable',
        'ChassisCommand',
        'PriorityTable',
        'ArbitrationResult',
        'ChassisState',
        'ChassisArbiter',
        'calibrate',
        'arbitrate',
        'runstop_enabled',
        'commands_to_controls',
        'command_to_input',
    ],
    'mppi': [
        'MppiParams',
        'Rollouts',
        'MppiController',
        'running_cost',
        'sample_rollouts',
        'softmax_weights',
        'mppi_update',
        'mpc_step',
    ],
}


__all__ = list(itertools.chain(*__modules_all__.values()))

def __getattr__(name):
    try:
        return globals()[name]
    except KeyError:
        pass

    if name in ('io', 'cli'):
        return importlib.import_module(f'.{name}', __name__)
    try:
        module_name = next(m for m in __modules_all__ if name in __modules_all__[m])
    except StopIteration:
        raise AttributeError(f"module '{__name__}' has no attribute '{name}'")
    module = importlib.import_module(f'.{module_name}', __name__)
    for key in __modules_all__[module_name]:
        globals()[key] = getattr(module, key)

    return globals()[name]


if TYPE_CHECKING:
    from .transforms import *
    from .tire import *
    from .vehicle import *
    from .bifilar import *
    from .ukf import *
    from .smoother import *
    from .track import *
    from .sim import *
    from .chassis import *
    from .mppi import *
    from . import io
    from . import cli
