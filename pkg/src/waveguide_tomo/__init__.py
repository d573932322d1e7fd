"""Three waveguide-coupled qubits under central-qubit frequency modulation,
and two-pulse phase tomography of the edge pair."""
from .analytic import (
    DegenerateSpectrum,
    MagnusMatrix,
    SylvesterEigens,
    asymptotic_observables,
    exp_m1,
    free_asymptotic_populations,
    free_evolution,
    magnus_m1,
    sylvester_eigens,
)
from .dynamics import StepTooLarge, Trajectory, observables, propagate, propagator, rhs
from .model import (
    AmplitudeCapExceeded,
    ModulationPulse,
    ReducedDensityMatrix,
    SystemConfig,
    ThreeQubitAmplitudes,
    TwoQubitPreparation,
    coupling_from_decay,
    density_from_preparation,
    design_pulse,
    pulse_area_u,
    pulse_integral,
    pulse_lambda,
)
from .tomography import (
    MeasurementRecord,
    ProtocolParams,
    ReconstructionReport,
    estimate_phase,
    estimate_populations,
    measure,
    reconstruct,
)

__version__ = "0.1.0"
