# src/core/conventions.py
#
# Convención de la transformada tiempo/frecuencia, fijada una sola vez.
#
# Con U(x,0) = f0, ∂t U(x,0) = -f1 y u(x,k) = (1/4π)∫(f1 + ik f0) e^{ik|x-y|}/|x-y| dy,
# la fórmula de Kirchhoff da
#
#     u(x, ω) = DUALITY_SIGN * ∫ U(x, t) e^{iωt} dt
#     U(x, t) = DUALITY_SIGN / (2π) * ∫ u(x, ω) e^{-iωt} dω
#
# y Parseval queda  ∫ |u|² dω = 2π ∫ |U|² dt.

import math

DUALITY_SIGN = -1.0
TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
