"""procgrid: simulator and toolchain for a TDM-scheduled 2D processor array."""

__version__ = "0.1.0"
