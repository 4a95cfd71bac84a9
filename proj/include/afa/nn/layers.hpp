#pragma once

#include <string>
#include <utility>
#include <vector>

#include "afa/core/rng.hpp"
#include "afa/nn/tape.hpp"

namespace afa::nn {

// --- weight initializers -----------------------------------------------------

Mat xavier_uniform(int rows, int cols, afa::Rng& rng);
// fan_in is the flattened input size feeding one output unit.
Mat kaiming_uniform(int rows, int cols, int fan_in, afa::Rng& rng);
Mat orthogonal_init(int rows, int cols, double gain, afa::Rng& rng);
// Columns scaled to a fixed norm; the standard actor-critic head init.
Mat normalized_columns(int rows, int cols, double std_dev, afa::Rng& rng);

enum class Init { xavier, kaiming, orthogonal, normalized_columns };

// --- layers ------------------------------------------------------------------
// Layers register their parameters in a ParameterSet at construction and hold
// raw pointers; the set must outlive the layer.

struct Linear {
    Parameter* W = nullptr;
    Parameter* b = nullptr;

    Linear() = default;
    Linear(ParameterSet& ps, const std::string& name, int in, int out, afa::Rng& rng,
           Init init = Init::kaiming, double gain = 1.0);

    Var operator()(Graph& g, Var x) const { return affine(x, g.param(*W), g.param(*b)); }
};

// Single LSTM cell; gate weights packed [i, f, g, o] along rows.
struct LstmCell {
    Parameter* Wx = nullptr;  // (4H x in)
    Parameter* Wh = nullptr;  // (4H x H)
    Parameter* b = nullptr;   // (4H x 1)
    int hidden = 0;

    LstmCell() = default;
    LstmCell(ParameterSet& ps, const std::string& name, int in, int hidden_size, afa::Rng& rng);

    // Returns the new (h, c).
    std::pair<Var, Var> operator()(Graph& g, Var x, Var h, Var c) const;
};

struct Conv2dLayer {
    Parameter* W = nullptr;
    Parameter* b = nullptr;
    ConvSpec spec;

    Conv2dLayer() = default;
    Conv2dLayer(ParameterSet& ps, const std::string& name, const ConvSpec& spec, afa::Rng& rng,
                Init init = Init::kaiming);

    Var operator()(Graph& g, Var x) const { return conv2d(x, g.param(*W), g.param(*b), spec); }
};

struct ConvTranspose2dLayer {
    Parameter* W = nullptr;
    Parameter* b = nullptr;
    ConvTransposeSpec spec;

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(ParameterSet& ps, const std::string& name,
                         const ConvTransposeSpec& spec, afa::Rng& rng);

    Var operator()(Graph& g, Var x) const {
        return conv2d_transpose(x, g.param(*W), g.param(*b), spec);
    }
};

// --- optimizer ---------------------------------------------------------------

class Adam {
public:
    Adam(ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    // Applies one update from the accumulated gradients, then zeroes them.
    // If max_grad_norm > 0 the global gradient norm is clipped first.
    void step(double max_grad_norm = 0.0);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    long step_count() const { return t_; }

private:
    ParameterSet* params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

}  // namespace afa::nn
