#include "qpr/pipeline.hpp"

#include <stdexcept>

namespace qpr {

QuadraticSymbol symbol_at(const ModelFamily& fam, double e, double embed_tol) {
    switch (fam.kind) {
        case FamilyKind::GenericQuadratic:
            return QuadraticSymbol(fam.nu(e), fam.omega, fam.f0);
        case FamilyKind::SchrodingerFlow:
            throw std::invalid_argument(
                "symbol_at: companion-form family has no oscillator normal form");
        case FamilyKind::AmoEmbedded: {
            QpLinearSystem sys = system_at(fam, e, embed_tol);
            const double nu_q = sys.a0(1, 0);  // a0 = nu_q * J
            TorusMap fq = sys.f;
            for (std::size_t i = 0; i < fq.table_size(); ++i) {
                Mat2c c = fq.coeff_flat(i);
                c(0, 1) = -c(0, 1);
                c(1, 0) = -c(1, 0);
                fq.coeff_flat(i) = c;
            }
            return QuadraticSymbol(nu_q, fam.omega, fq);
        }
    }
    throw std::logic_error("symbol_at: unknown family kind");
}

}  // namespace qpr
