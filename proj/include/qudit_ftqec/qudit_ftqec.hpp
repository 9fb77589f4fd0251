#ifndef QUDIT_FTQEC_QUDIT_FTQEC_HPP
#define QUDIT_FTQEC_QUDIT_FTQEC_HPP

#include "linalg.hpp"
#include "spin_model.hpp"
#include "dephasing.hpp"
#include "nnls.hpp"
#include "code_synthesis.hpp"
#include "et_compiler.hpp"
#include "lindblad.hpp"
#include "protocol.hpp"
#include "two_qubit.hpp"
#include "config.hpp"
#include "sweep.hpp"

#endif
