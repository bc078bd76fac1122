/* Write far outside a small stack array. */
int main(void) {
    int a[4];
    volatile long i = 1099511627776L; /* 2^40 elements past the end */
    a[i] = 7;
    return a[3];
}
