#pragma once

#include <utility>
#include <vector>

#include "mprof/construct.hpp"

namespace mprof::detail {

// Runs verify_D and records the outcome in the provenance; throws VerificationFailure.
ApproxCertificate finalize(ApproxCertificate c, const VerifyOptions& opt);

// Length-prefixed block at pos.
Element read_block(const std::vector<Int>& v, std::size_t& pos);
std::pair<Element, Element> split_product(const Element& e);

// Finitely supported function and top element of a wreath product element.
struct WreathParts {
  std::vector<std::pair<Element, Element>> support;
  Element top;
};
WreathParts split_wreath(const Element& e);
Element join_wreath(const WreathParts& w);

// Images of a certificate restricted to B(radius), as a certificate at that radius.
ApproxCertificate restrict_to(const ApproxCertificate& c, int radius, std::size_t cap);

}  // namespace mprof::detail
