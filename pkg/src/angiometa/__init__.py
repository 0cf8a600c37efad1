"""Size/vasculature structured metastatic density under anti-angiogenic and cytotoxic drugs."""
from .pkpd import (NO_THERAPY, TABLE1, DrugSchedule, GrowthParams, Therapy,
                   TumorGrowthField, angiostatin, concentration, endostatin, every, tnp470)
from .characteristics import Domain, Entrance, InflowError, Interior, NumericalError, TimeGrid
from .transport import (DataMode, Discretization, Model, Quadrature, SimulationSeries,
                        emission_split, metastatic_index, simulate, visible_count)

__version__ = "0.1.0"
