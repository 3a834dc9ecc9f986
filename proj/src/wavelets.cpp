#include <array>
#include <vector>
#include <span>
#include <string>

#include "muffin/error.hpp"
#include "muffin/transforms.hpp"

namespace muffin {

namespace {

// Minimum-phase spectral factors of the Daubechies half-band polynomials,
// computed at 60 digits and rounded to 20.
const std::array<std::vector<double>, 8> kDaubechies = {{
  // db1
  {7.0710678118654752440e-1, 7.0710678118654752440e-1},
  // db2
  {4.8296291314453414337e-1, 8.3651630373780790558e-1, 2.2414386804201338103e-1, -1.2940952255126038117e-1},
  // db3
  {3.3267055295008261600e-1, 8.0689150931109257649e-1, 4.5987750211849157010e-1, -1.3501102001025458870e-1, -8.5441273882026661693e-2, 3.5226291885709536603e-2},
  // db4
  {2.3037781330889650086e-1, 7.1484657055291564709e-1, 6.3088076792985890788e-1, -2.7983769416859854211e-2, -1.8703481171909308408e-1, 3.0841381835560763627e-2, 3.2883011666885199735e-2, -1.0597401785069032105e-2},
  // db5
  {1.6010239797419291448e-1, 6.0382926979718967054e-1, 7.2430852843777292773e-1, 1.3842814590132073151e-1, -2.4229488706638203186e-1, -3.2244869584638374648e-2, 7.7571493840045713523e-2, -6.2414902127982742742e-3, -1.2580751999081999469e-2, 3.3357252854737712780e-3},
  // db6
  {1.1154074335010946362e-1, 4.9462389039845308568e-1, 7.5113390802109535068e-1, 3.1525035170919762909e-1, -2.2626469396543982008e-1, -1.2976686756726193556e-1, 9.7501605587323049102e-2, 2.7522865530305728626e-2, -3.1582039317486029565e-2, 5.5384220116149613925e-4, 4.7772575109455106396e-3, -1.0773010853084795649e-3},
  // db7
  {7.7852054085009179020e-2, 3.9653931948191730654e-1, 7.2913209084623511992e-1, 4.6978228740519312247e-1, -1.4390600392856497541e-1, -2.2403618499387498264e-1, 7.1309219266830264751e-2, 8.0612609151083071913e-2, -3.8029936935014413580e-2, -1.6574541630666880654e-2, 1.2550998556099840613e-2, 4.2957797292136652113e-4, -1.8016407040474909153e-3, 3.5371379997452024845e-4},
  // db8
  {5.4415842243104009955e-2, 3.1287159091429997066e-1, 6.7563073629728980681e-1, 5.8535468365420671277e-1, -1.5829105256349305667e-2, -2.8401554296154692652e-1, 4.7248457391328277036e-4, 1.2874742662047845886e-1, -1.7369301001807546170e-2, -4.4088253930794751507e-2, 1.3981027917398281649e-2, 8.7460940474057767164e-3, -4.8703529934515743104e-3, -3.9174037337694704630e-4, 6.7544940645056936637e-4, -1.1747678412476953373e-4},
}};

}  // namespace

std::span<const double> daubechies_filter(int order) {
  if (order < 1 || order > 8) {
    throw ConfigError("Daubechies order must be in 1..8, got " +
                      std::to_string(order));
  }
  return kDaubechies[order - 1];
}

}  // namespace muffin
