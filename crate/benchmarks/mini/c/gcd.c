/* Greatest common divisor. */

int gcd(int a, int b)
{
    while (b > 1) {
        int t = a % b;
        a = b;
        b = t;
    }
    return a;
}
